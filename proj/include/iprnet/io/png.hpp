#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "iprnet/core/errors.hpp"

namespace iprnet {

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 = gray (or palette indices), 3 = RGB
    std::vector<std::uint8_t> pixels; // row-major, interleaved
};

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    const auto crc =
        static_cast<std::uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size())));
    put_be32(out, crc);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace detail

inline void write_png(const std::string& path, const PngImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw IoError("write_png: only 1- or 3-channel images are supported");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw IoError("write_png: pixel buffer size does not match dimensions");

    const int stride = img.width * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>((stride + 1)) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * stride,
                   img.pixels.begin() + static_cast<std::ptrdiff_t>(y + 1) * stride);
    }
    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(comp_size);
    if (compress2(compressed.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("write_png: deflate failed");
    compressed.resize(comp_size);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                     // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);             // gray / truecolor
    ihdr.push_back(0);                                     // compression
    ihdr.push_back(0);                                     // filter
    ihdr.push_back(0);                                     // interlace
    detail::append_chunk(out, "IHDR", ihdr);
    detail::append_chunk(out, "IDAT", compressed);
    detail::append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write_png: write failed for " + path);
}

/// Reads 8-bit non-interlaced PNGs. Grayscale and truecolor map to 1 and 3
/// channels; alpha is dropped; palette images return the palette indices as a
/// single channel (the convention for class-id masks).
inline PngImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_png: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw IoError("read_png: " + path + " is not a PNG file");

    PngImage img;
    int bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = detail::get_be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw IoError("read_png: truncated chunk in " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            img.width = static_cast<int>(detail::get_be32(data));
            img.height = static_cast<int>(detail::get_be32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            interlace = data[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0) throw IoError("read_png: missing IHDR in " + path);
    if (bit_depth != 8) throw IoError("read_png: only 8-bit PNGs are supported: " + path);
    if (interlace != 0) throw IoError("read_png: interlaced PNGs are not supported: " + path);

    int src_channels = 0;
    switch (color_type) {
    case 0: src_channels = 1; break; // gray
    case 2: src_channels = 3; break; // RGB
    case 3: src_channels = 1; break; // palette indices
    case 4: src_channels = 2; break; // gray + alpha
    case 6: src_channels = 4; break; // RGBA
    default: throw IoError("read_png: unsupported color type in " + path);
    }

    const std::size_t stride = static_cast<std::size_t>(img.width) * src_channels;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_size != raw.size())
        throw IoError("read_png: inflate failed for " + path);

    // Undo per-row filters in place.
    std::vector<std::uint8_t> prev(stride, 0);
    std::vector<std::uint8_t> decoded(stride * img.height);
    const int bpp = src_channels;
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * static_cast<std::size_t>(y)];
        const std::uint8_t* src = &raw[(stride + 1) * static_cast<std::size_t>(y) + 1];
        std::uint8_t* dst = &decoded[stride * static_cast<std::size_t>(y)];
        for (std::size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
            const int b = prev[x];
            const int c = x >= static_cast<std::size_t>(bpp) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += detail::paeth(a, b, c); break;
            default: throw IoError("read_png: unknown filter type in " + path);
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
        std::memcpy(prev.data(), dst, stride);
    }

    img.channels = (src_channels >= 3) ? 3 : 1;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < img.channels; ++c)
            img.pixels[i * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)] =
                decoded[i * static_cast<std::size_t>(src_channels) + static_cast<std::size_t>(c)];
    return img;
}

} // namespace iprnet
