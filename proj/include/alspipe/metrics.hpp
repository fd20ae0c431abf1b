#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace alspipe::metrics {

struct ConfusionCounts {
    std::vector<std::uint64_t> tp;
    std::vector<std::uint64_t> fp;
    std::vector<std::uint64_t> fn;
    std::uint64_t total = 0;

    ConfusionCounts() = default;
    explicit ConfusionCounts(std::size_t num_classes)
        : tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0) {}

    std::size_t num_classes() const { return tp.size(); }

    // Associative and commutative, so partial tallies can be reduced in any order.
    void merge(const ConfusionCounts& other);
};

ConfusionCounts accumulate(std::span<const int> pred, std::span<const int> truth,
                           std::size_t num_classes);

// nullopt when TP + FP + FN == 0 (class absent from both pred and truth).
std::optional<double> iou(const ConfusionCounts& c, std::size_t cls);

enum class MeanMode {
    ExcludeUndefined,  // mean over classes with defined IoU
    StrictDivideByC,   // undefined classes contribute 0 and the mean divides by C
};

double miou(const ConfusionCounts& c, MeanMode mode = MeanMode::ExcludeUndefined);
double oa(const ConfusionCounts& c);

// Label file IO: per-point CSV "id,label" or per-sample JSONL
// {"id": ..., "label": ...}. Returned pairs are sorted by id.
std::vector<std::pair<std::string, int>> read_labels(const std::string& text);

std::string report_json(const ConfusionCounts& c);

}  // namespace alspipe::metrics
