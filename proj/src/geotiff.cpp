#include "alspipe/raster.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace alspipe::raster {

namespace {

struct TiffReader {
    std::span<const std::byte> bytes;
    bool big_endian = false;

    std::uint8_t u8(std::size_t off) const {
        if (off >= bytes.size())
            throw std::runtime_error("TIFF: read past end of file at byte " + std::to_string(off));
        return static_cast<std::uint8_t>(bytes[off]);
    }
    std::uint16_t u16(std::size_t off) const {
        const std::uint16_t a = u8(off), b = u8(off + 1);
        return big_endian ? static_cast<std::uint16_t>(a << 8 | b)
                          : static_cast<std::uint16_t>(b << 8 | a);
    }
    std::uint32_t u32(std::size_t off) const {
        const std::uint32_t a = u8(off), b = u8(off + 1), c = u8(off + 2), d = u8(off + 3);
        return big_endian ? (a << 24 | b << 16 | c << 8 | d) : (d << 24 | c << 16 | b << 8 | a);
    }
    double f64(std::size_t off) const {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            const int shift = big_endian ? (56 - i * 8) : (i * 8);
            bits |= static_cast<std::uint64_t>(u8(off + i)) << shift;
        }
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    float f32(std::size_t off) const {
        const std::uint32_t bits = u32(off);
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
};

struct IfdEntry {
    std::uint16_t tag = 0;
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::uint32_t value_or_offset = 0;  // raw field; inline when payload fits 4 bytes
    std::size_t field_offset = 0;       // offset of the value field itself
};

std::size_t type_size(std::uint16_t type) {
    switch (type) {
    case 1: return 1;   // BYTE
    case 2: return 1;   // ASCII
    case 3: return 2;   // SHORT
    case 4: return 4;   // LONG
    case 5: return 8;   // RATIONAL
    case 11: return 4;  // FLOAT
    case 12: return 8;  // DOUBLE
    default: return 0;
    }
}

// First element as unsigned integer (SHORT or LONG).
std::uint32_t entry_uint(const TiffReader& r, const IfdEntry& e) {
    const std::size_t off = type_size(e.type) * e.count <= 4
                                ? e.field_offset
                                : static_cast<std::size_t>(r.u32(e.field_offset));
    if (e.type == 3)
        return r.u16(off);
    if (e.type == 4)
        return r.u32(off);
    throw std::runtime_error("TIFF: tag " + std::to_string(e.tag) + " has unexpected type");
}

std::vector<double> entry_doubles(const TiffReader& r, const IfdEntry& e) {
    if (e.type != 12)
        throw std::runtime_error("TIFF: tag " + std::to_string(e.tag) + " is not DOUBLE");
    const std::size_t off = static_cast<std::size_t>(r.u32(e.field_offset));
    std::vector<double> out(e.count);
    for (std::uint32_t i = 0; i < e.count; ++i)
        out[i] = r.f64(off + 8 * i);
    return out;
}

std::string entry_ascii(const TiffReader& r, const IfdEntry& e) {
    const std::size_t off = e.count <= 4 ? e.field_offset
                                         : static_cast<std::size_t>(r.u32(e.field_offset));
    std::string out;
    for (std::uint32_t i = 0; i < e.count; ++i) {
        const char c = static_cast<char>(r.u8(off + i));
        if (c == '\0')
            break;
        out.push_back(c);
    }
    return out;
}

}  // namespace

RasterGrid parse_geotiff(std::span<const std::byte> bytes, CrsTag crs) {
    TiffReader r{bytes};
    if (bytes.size() < 8)
        throw std::runtime_error("TIFF: file shorter than header");
    const std::uint8_t b0 = r.u8(0), b1 = r.u8(1);
    if (b0 == 'I' && b1 == 'I')
        r.big_endian = false;
    else if (b0 == 'M' && b1 == 'M')
        r.big_endian = true;
    else
        throw std::runtime_error("TIFF: bad byte-order mark");
    if (r.u16(2) != 42)
        throw std::runtime_error("TIFF: bad magic number");

    const std::size_t ifd = r.u32(4);
    const std::uint16_t entry_count = r.u16(ifd);

    std::uint32_t width = 0, height = 0, bits = 0, compression = 1, samples = 1, sample_format = 1;
    std::uint32_t strip_offset = 0, strip_count = 0, rows_per_strip = 0;
    std::vector<double> pixel_scale, tiepoint;
    std::string nodata_text;
    bool have_strip = false;

    for (std::uint16_t i = 0; i < entry_count; ++i) {
        const std::size_t eoff = ifd + 2 + static_cast<std::size_t>(i) * 12;
        IfdEntry e;
        e.tag = r.u16(eoff);
        e.type = r.u16(eoff + 2);
        e.count = r.u32(eoff + 4);
        e.field_offset = eoff + 8;
        e.value_or_offset = r.u32(eoff + 8);

        switch (e.tag) {
        case 256: width = entry_uint(r, e); break;
        case 257: height = entry_uint(r, e); break;
        case 258: bits = entry_uint(r, e); break;
        case 259: compression = entry_uint(r, e); break;
        case 273:
            if (e.count != 1)
                throw std::runtime_error("TIFF: only single-strip images supported");
            strip_offset = entry_uint(r, e);
            have_strip = true;
            break;
        case 277: samples = entry_uint(r, e); break;
        case 278: rows_per_strip = entry_uint(r, e); break;
        case 279: strip_count = entry_uint(r, e); break;
        case 339: sample_format = entry_uint(r, e); break;
        case 33550: pixel_scale = entry_doubles(r, e); break;
        case 33922: tiepoint = entry_doubles(r, e); break;
        case 42113: nodata_text = entry_ascii(r, e); break;
        default: break;  // unknown tags ignored
        }
    }

    if (width == 0 || height == 0)
        throw std::runtime_error("TIFF: missing image dimensions");
    if (compression != 1)
        throw std::runtime_error("TIFF: compressed images unsupported (compression=" +
                                 std::to_string(compression) + ")");
    if (samples != 1)
        throw std::runtime_error("TIFF: multi-band images unsupported");
    if (!have_strip)
        throw std::runtime_error("TIFF: missing strip offsets");
    if (rows_per_strip != 0 && rows_per_strip < height)
        throw std::runtime_error("TIFF: only single-strip images supported");
    if (pixel_scale.size() < 2 || tiepoint.size() < 6)
        throw std::runtime_error("GeoTIFF: ModelPixelScale and ModelTiepoint required");

    const bool is_float = sample_format == 3;
    if (!((bits == 8 && !is_float) || (bits == 32 && is_float)))
        throw std::runtime_error("TIFF: only uint8 and float32 samples supported");

    const double sx = pixel_scale[0];
    const double sy = pixel_scale[1];
    if (!(sx > 0.0) || std::abs(sx - sy) > 1e-9 * std::max(sx, sy))
        throw std::runtime_error("GeoTIFF: cells must be square");

    // Tiepoint maps raster point (i, j) to model (x, y); shift to pixel (0, 0).
    const double origin_x = tiepoint[3] - tiepoint[0] * sx;
    const double origin_y = tiepoint[4] + tiepoint[1] * sy;

    float nodata = -9999.0f;
    if (!nodata_text.empty())
        nodata = std::strtof(nodata_text.c_str(), nullptr);

    RasterGrid grid(static_cast<int>(width), static_cast<int>(height), origin_x, origin_y, sx,
                    nodata, crs);

    const std::size_t pixel_bytes = bits / 8;
    const std::size_t expected = static_cast<std::size_t>(width) * height * pixel_bytes;
    if (strip_count != 0 && strip_count < expected)
        throw std::runtime_error("TIFF: strip byte count smaller than image");
    if (strip_offset + expected > bytes.size())
        throw std::runtime_error("TIFF: strip data truncated at byte " +
                                 std::to_string(bytes.size()));

    auto band = grid.band();
    for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
        if (is_float)
            band[p] = r.f32(strip_offset + p * 4);
        else
            band[p] = static_cast<float>(r.u8(strip_offset + p));
    }
    return grid;
}

}  // namespace alspipe::raster
