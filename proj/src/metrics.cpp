#include "alspipe/metrics.hpp"

#include "alspipe/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace alspipe::metrics {

void ConfusionCounts::merge(const ConfusionCounts& other) {
    if (other.num_classes() != num_classes())
        throw std::invalid_argument("confusion merge: class count mismatch");
    for (std::size_t i = 0; i < tp.size(); ++i) {
        tp[i] += other.tp[i];
        fp[i] += other.fp[i];
        fn[i] += other.fn[i];
    }
    total += other.total;
}

ConfusionCounts accumulate(std::span<const int> pred, std::span<const int> truth,
                           std::size_t num_classes) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("accumulate: pred/truth length mismatch (" +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    ConfusionCounts c(num_classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        const int t = truth[i];
        if (p < 0 || static_cast<std::size_t>(p) >= num_classes || t < 0 ||
            static_cast<std::size_t>(t) >= num_classes)
            throw std::out_of_range("accumulate: label out of range at item " + std::to_string(i));
        if (p == t) {
            c.tp[static_cast<std::size_t>(p)]++;
        } else {
            c.fp[static_cast<std::size_t>(p)]++;
            c.fn[static_cast<std::size_t>(t)]++;
        }
        c.total++;
    }
    return c;
}

std::optional<double> iou(const ConfusionCounts& c, std::size_t cls) {
    if (cls >= c.num_classes())
        throw std::out_of_range("iou: class index out of range");
    const std::uint64_t denom = c.tp[cls] + c.fp[cls] + c.fn[cls];
    if (denom == 0)
        return std::nullopt;
    return static_cast<double>(c.tp[cls]) / static_cast<double>(denom);
}

double miou(const ConfusionCounts& c, MeanMode mode) {
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t i = 0; i < c.num_classes(); ++i) {
        if (const auto v = iou(c, i)) {
            sum += *v;
            defined++;
        }
    }
    if (mode == MeanMode::StrictDivideByC) {
        if (c.num_classes() == 0)
            throw std::invalid_argument("miou: no classes");
        return sum / static_cast<double>(c.num_classes());
    }
    if (defined == 0)
        throw std::runtime_error("miou: IoU undefined for every class");
    return sum / static_cast<double>(defined);
}

double oa(const ConfusionCounts& c) {
    if (c.total == 0)
        throw std::runtime_error("oa: empty evaluation");
    std::uint64_t correct = 0;
    for (std::uint64_t v : c.tp)
        correct += v;
    return static_cast<double>(correct) / static_cast<double>(c.total);
}

std::vector<std::pair<std::string, int>> read_labels(const std::string& text) {
    std::vector<std::pair<std::string, int>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty())
            continue;
        if (line.front() == '{') {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw std::runtime_error("labels line " + std::to_string(line_no) + ": " + e.what());
            }
            std::string id;
            if (doc.at("id").is_string())
                id = doc.at("id").get<std::string>();
            else
                id = std::to_string(doc.at("id").get<long long>());
            out.emplace_back(id, doc.at("label").get<int>());
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("labels line " + std::to_string(line_no) +
                                     ": expected 'id,label'");
        const std::string id = line.substr(0, comma);
        if (line_no == 1 && id == "id")
            continue;  // optional header row
        int label = 0;
        const char* begin = line.data() + comma + 1;
        const char* end = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(begin, end, label);
        if (ec != std::errc{} || ptr != end)
            throw std::runtime_error("labels line " + std::to_string(line_no) +
                                     ": non-integer label");
        out.emplace_back(id, label);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string report_json(const ConfusionCounts& c) {
    std::ostringstream out;
    out << "{\n  \"classes\": " << c.num_classes() << ",\n";
    out << "  \"total\": " << c.total << ",\n";
    out << "  \"iou\": [";
    std::size_t undefined = 0;
    for (std::size_t i = 0; i < c.num_classes(); ++i) {
        if (i)
            out << ", ";
        if (const auto v = iou(c, i)) {
            out << format_double(100.0 * *v, 1);
        } else {
            out << "null";
            undefined++;
        }
    }
    out << "],\n";
    out << "  \"undefined_classes\": " << undefined << ",\n";
    const bool any_defined = undefined < c.num_classes();
    out << "  \"miou\": "
        << (any_defined ? format_double(100.0 * miou(c, MeanMode::ExcludeUndefined), 1) : "null")
        << ",\n";
    out << "  \"miou_strict\": " << format_double(100.0 * miou(c, MeanMode::StrictDivideByC), 1)
        << ",\n";
    out << "  \"oa\": " << format_double(100.0 * oa(c), 1) << "\n}\n";
    return out.str();
}

}  // namespace alspipe::metrics
