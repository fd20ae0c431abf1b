#include "alspipe/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace alspipe::pointcloud {

namespace {

constexpr std::size_t kHeaderSize12 = 227;
constexpr std::size_t kHeaderSize13 = 235;
constexpr std::size_t kHeaderSize14 = 375;

struct Cursor {
    std::span<const std::byte> bytes;

    void require(std::size_t off, std::size_t len, const char* what) const {
        if (off + len > bytes.size())
            throw LasError(std::string("LAS: truncated ") + what + " at byte " +
                           std::to_string(bytes.size()) + " (need " + std::to_string(off + len) +
                           ")");
    }
    std::uint8_t u8(std::size_t off) const { return static_cast<std::uint8_t>(bytes[off]); }
    std::uint16_t u16(std::size_t off) const {
        return static_cast<std::uint16_t>(u8(off) | (u8(off + 1) << 8));
    }
    std::uint32_t u32(std::size_t off) const {
        return u8(off) | (std::uint32_t(u8(off + 1)) << 8) | (std::uint32_t(u8(off + 2)) << 16) |
               (std::uint32_t(u8(off + 3)) << 24);
    }
    std::uint64_t u64(std::size_t off) const {
        return u32(off) | (std::uint64_t(u32(off + 4)) << 32);
    }
    std::int32_t i32(std::size_t off) const { return static_cast<std::int32_t>(u32(off)); }
    double f64(std::size_t off) const {
        const std::uint64_t bits = u64(off);
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
};

struct Writer {
    std::vector<std::byte> bytes;

    void u8(std::uint8_t v) { bytes.push_back(static_cast<std::byte>(v)); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v));
        u16(static_cast<std::uint16_t>(v >> 16));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u64(bits);
    }
    void zeros(std::size_t n) { bytes.insert(bytes.end(), n, std::byte{0}); }
    void text(const char* s, std::size_t field_len) {
        const std::size_t len = std::min(std::strlen(s), field_len);
        for (std::size_t i = 0; i < len; ++i)
            u8(static_cast<std::uint8_t>(s[i]));
        zeros(field_len - len);
    }
};

std::size_t record_size(int format) {
    switch (format) {
    case 0: return 20;
    case 1: return 28;
    case 6: return 30;
    default: return 0;
    }
}

}  // namespace

bool is_laz(std::span<const std::byte> bytes) {
    Cursor c{bytes};
    if (bytes.size() < kHeaderSize12)
        return false;
    if (std::memcmp(bytes.data(), "LASF", 4) != 0)
        return false;
    // laszip sets the high bit of the point data record format.
    if (c.u8(104) & 0x80)
        return true;
    // Scan VLR user ids for the laszip marker.
    const std::size_t header_size = c.u16(94);
    const std::uint32_t vlr_count = c.u32(100);
    std::size_t off = header_size;
    for (std::uint32_t i = 0; i < vlr_count; ++i) {
        if (off + 54 > bytes.size())
            break;
        char user_id[17] = {};
        std::memcpy(user_id, bytes.data() + off + 2, 16);
        if (std::strncmp(user_id, "laszip encoded", 16) == 0)
            return true;
        off += 54 + c.u16(off + 20);
    }
    return false;
}

PointTile parse_las(std::span<const std::byte> bytes) {
    Cursor c{bytes};
    c.require(0, kHeaderSize12, "header");
    if (std::memcmp(bytes.data(), "LASF", 4) != 0)
        throw LasError("LAS: bad magic (expected 'LASF')");

    const int major = c.u8(24);
    const int minor = c.u8(25);
    if (major != 1 || minor < 2 || minor > 4)
        throw LasError("LAS: unsupported version " + std::to_string(major) + "." +
                       std::to_string(minor));

    const std::size_t header_size = c.u16(94);
    const std::size_t min_header = minor == 4 ? kHeaderSize14 : minor == 3 ? kHeaderSize13 : kHeaderSize12;
    if (header_size < min_header)
        throw LasError("LAS: header size " + std::to_string(header_size) + " too small for 1." +
                       std::to_string(minor));
    c.require(0, header_size, "header");

    if (is_laz(bytes))
        throw LasError("LAS: compressed (LAZ) payload; decompress first (see the ingest "
                       "decompress hook)");

    const int format = c.u8(104);
    const std::size_t declared_record_len = c.u16(105);
    const std::size_t core_len = record_size(format);
    if (core_len == 0)
        throw LasError("LAS: unsupported point data record format " + std::to_string(format));
    if (declared_record_len < core_len)
        throw LasError("LAS: record length " + std::to_string(declared_record_len) +
                       " smaller than format " + std::to_string(format) + " core size");

    std::uint64_t count = c.u32(107);  // legacy
    if (minor == 4) {
        const std::uint64_t count64 = c.u64(247);
        if (count64 != 0)
            count = count64;
    }

    const std::size_t data_offset = c.u32(96);
    if (data_offset < header_size || data_offset > bytes.size())
        throw LasError("LAS: point data offset " + std::to_string(data_offset) + " out of range");

    const double scale_x = c.f64(131), scale_y = c.f64(139), scale_z = c.f64(147);
    const double off_x = c.f64(155), off_y = c.f64(163), off_z = c.f64(171);
    const double max_x = c.f64(179), min_x = c.f64(187);
    const double max_y = c.f64(195), min_y = c.f64(203);

    const std::size_t available = bytes.size() - data_offset;
    const std::size_t needed = static_cast<std::size_t>(count) * declared_record_len;
    if (needed > available) {
        if (available % declared_record_len != 0)
            throw LasError("LAS: truncated point record at byte " +
                           std::to_string(data_offset + (available / declared_record_len) *
                                                            declared_record_len));
        throw LasError("LAS: point count mismatch: header declares " + std::to_string(count) +
                       ", payload holds " + std::to_string(available / declared_record_len));
    }

    PointTile tile;
    tile.points.reserve(static_cast<std::size_t>(count));

    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t base = data_offset + static_cast<std::size_t>(i) * declared_record_len;
        PointRecord p;
        p.x = c.i32(base) * scale_x + off_x;
        p.y = c.i32(base + 4) * scale_y + off_y;
        p.z = c.i32(base + 8) * scale_z + off_z;
        p.intensity = c.u16(base + 12);
        const std::uint8_t flags = c.u8(base + 14);
        if (format == 6) {
            p.return_number = flags & 0x0f;
            p.number_of_returns = (flags >> 4) & 0x0f;
            p.classification = c.u8(base + 16);
        } else {
            p.return_number = flags & 0x07;
            p.number_of_returns = (flags >> 3) & 0x07;
            p.classification = c.u8(base + 15) & 0x1f;
        }
        tile.points.push_back(p);
    }

    // Header extents, widened if any point falls outside them.
    tile.bounds = {min_x, min_y, max_x, max_y};
    for (const PointRecord& p : tile.points) {
        tile.bounds.minx = std::min(tile.bounds.minx, p.x);
        tile.bounds.miny = std::min(tile.bounds.miny, p.y);
        tile.bounds.maxx = std::max(tile.bounds.maxx, p.x);
        tile.bounds.maxy = std::max(tile.bounds.maxy, p.y);
    }
    return tile;
}

std::vector<std::byte> write_las(const PointTile& tile, const LasWriteOptions& options) {
    if (tile.points.empty())
        throw LasError("LAS: refusing to write an empty tile");
    if (!(options.scale > 0.0))
        throw LasError("LAS: scale must be > 0");

    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = max_x, min_z = min_x, max_z = max_x;
    for (const PointRecord& p : tile.points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
        min_z = std::min(min_z, p.z);
        max_z = std::max(max_z, p.z);
    }

    const double scale = options.scale;
    auto quantize = [&](double v, double offset) {
        const double q = std::round((v - offset) / scale);
        if (q < std::numeric_limits<std::int32_t>::min() ||
            q > std::numeric_limits<std::int32_t>::max())
            throw LasError("LAS: coordinate overflow under scale " + std::to_string(scale));
        return static_cast<std::int32_t>(q);
    };

    const std::uint64_t count = tile.points.size();
    constexpr int kFormat = 6;
    const std::size_t rec_len = record_size(kFormat);

    Writer w;
    w.bytes.reserve(kHeaderSize14 + count * rec_len);

    w.text("LASF", 4);
    w.u16(0);        // file source id
    w.u16(0);        // global encoding
    w.zeros(16);     // project guid
    w.u8(1);         // version major
    w.u8(4);         // version minor
    w.text("alspipe", 32);
    w.text("alspipe writer", 32);
    w.u16(1);        // creation day of year
    w.u16(2024);     // creation year
    w.u16(static_cast<std::uint16_t>(kHeaderSize14));
    w.u32(static_cast<std::uint32_t>(kHeaderSize14));  // offset to point data
    w.u32(0);        // number of VLRs
    w.u8(kFormat);
    w.u16(static_cast<std::uint16_t>(rec_len));
    // Legacy counts are zero for format >= 6.
    w.u32(0);
    for (int i = 0; i < 5; ++i)
        w.u32(0);
    w.f64(scale);
    w.f64(scale);
    w.f64(scale);
    w.f64(min_x);
    w.f64(min_y);
    w.f64(min_z);
    w.f64(max_x);
    w.f64(min_x);
    w.f64(max_y);
    w.f64(min_y);
    w.f64(max_z);
    w.f64(min_z);
    w.u64(0);  // waveform offset
    w.u64(0);  // extended VLR offset
    w.u32(0);  // extended VLR count
    w.u64(count);
    std::uint64_t by_return[15] = {};
    for (const PointRecord& p : tile.points) {
        if (p.return_number >= 1 && p.return_number <= 15)
            by_return[p.return_number - 1]++;
    }
    for (std::uint64_t n : by_return)
        w.u64(n);

    if (w.bytes.size() != kHeaderSize14)
        throw LasError("LAS: internal header layout error");

    for (const PointRecord& p : tile.points) {
        w.i32(quantize(p.x, min_x));
        w.i32(quantize(p.y, min_y));
        w.i32(quantize(p.z, min_z));
        w.u16(p.intensity);
        w.u8(static_cast<std::uint8_t>((p.return_number & 0x0f) |
                                       ((p.number_of_returns & 0x0f) << 4)));
        w.u8(0);  // classification flags / scanner channel / direction / edge
        w.u8(p.classification);
        w.u8(0);  // user data
        w.u16(0); // scan angle
        w.u16(0); // point source id
        w.f64(0.0);  // gps time
    }
    return w.bytes;
}

PointTile crop(const PointTile& tile, const Bounds& bbox) {
    PointTile out;
    out.bounds = bbox;
    out.utm_zone = tile.utm_zone;
    out.hemisphere = tile.hemisphere;
    out.source_id = tile.source_id;
    out.capture_year = tile.capture_year;
    for (const PointRecord& p : tile.points) {
        if (p.x >= bbox.minx && p.x < bbox.maxx && p.y >= bbox.miny && p.y < bbox.maxy)
            out.points.push_back(p);
    }
    return out;
}

}  // namespace alspipe::pointcloud
