#include "pags/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace pags {

namespace {

struct File {
    std::FILE* f = nullptr;
    ~File() {
        if (f) std::fclose(f);
    }
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw Error(std::string("libpng: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

void write_rows(const std::string& path, int width, int height, int color_type, int bit_depth,
                const std::vector<std::uint8_t>& bytes, std::size_t row_bytes) {
    File file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw Error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng initialization failed");
    }
    try {
        png_init_io(png, file.f);
        png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < height; ++y) png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * row_bytes);
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

struct Decoded {
    int width = 0, height = 0, channels = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> bytes;
    std::size_t row_bytes = 0;
};

Decoded read_rows(const std::string& path, bool as_rgb) {
    File file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw Error("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw ParseError(path + " is not a PNG file", 0);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng initialization failed");
    }
    Decoded d;
    try {
        png_init_io(png, file.f);
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        d.color_type = png_get_color_type(png, info);
        d.bit_depth = png_get_bit_depth(png, info);
        if (as_rgb) {
            if (d.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
            if (d.color_type == PNG_COLOR_TYPE_GRAY || d.color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
                if (d.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
                png_set_gray_to_rgb(png);
            }
            if (d.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
            png_set_strip_16(png);
        } else {
            if (d.color_type != PNG_COLOR_TYPE_GRAY) throw ParseError(path + ": label masks must be single-channel", 0);
            if (d.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        }
        png_read_update_info(png, info);
        d.width = static_cast<int>(png_get_image_width(png, info));
        d.height = static_cast<int>(png_get_image_height(png, info));
        d.channels = png_get_channels(png, info);
        d.bit_depth = png_get_bit_depth(png, info);
        d.row_bytes = png_get_rowbytes(png, info);
        d.bytes.resize(d.row_bytes * d.height);
        for (int y = 0; y < d.height; ++y) png_read_row(png, d.bytes.data() + y * d.row_bytes, nullptr);
        png_read_end(png, nullptr);
    } catch (const ParseError&) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    } catch (const Error& e) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": " + e.what(), 0);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
}

}  // namespace

void write_png(const std::string& path, int width, int height, std::span<const double> rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw DimensionError("write_png: size mismatch");
    std::vector<std::uint8_t> bytes(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[i], 0.0, 1.0) * 255.0));
    }
    write_rows(path, width, height, PNG_COLOR_TYPE_RGB, 8, bytes, static_cast<std::size_t>(width) * 3);
}

RgbImage read_png(const std::string& path) {
    const Decoded d = read_rows(path, true);
    RgbImage img;
    img.width = d.width;
    img.height = d.height;
    img.data.resize(static_cast<std::size_t>(d.width) * d.height * 3);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < 3 * d.width; ++x) {
            img.data[static_cast<std::size_t>(y) * d.width * 3 + x] = d.bytes[y * d.row_bytes + x] / 255.0;
        }
    return img;
}

void write_label_png(const std::string& path, int width, int height, std::span<const std::int32_t> labels) {
    if (labels.size() != static_cast<std::size_t>(width) * height) {
        throw DimensionError("write_label_png: size mismatch");
    }
    std::int32_t lo = 0, hi = 0;
    for (auto l : labels) {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    if (lo < 0 || hi > 65535) throw ConfigError("labels must lie in [0, 65535] to be stored as PNG");
    if (hi <= 255) {
        std::vector<std::uint8_t> bytes(labels.begin(), labels.end());
        write_rows(path, width, height, PNG_COLOR_TYPE_GRAY, 8, bytes, static_cast<std::size_t>(width));
        return;
    }
    std::vector<std::uint8_t> bytes(labels.size() * 2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(labels[i] >> 8);  // PNG is big-endian
        bytes[2 * i + 1] = static_cast<std::uint8_t>(labels[i] & 0xff);
    }
    write_rows(path, width, height, PNG_COLOR_TYPE_GRAY, 16, bytes, static_cast<std::size_t>(width) * 2);
}

LabelImage read_label_png(const std::string& path) {
    const Decoded d = read_rows(path, false);
    LabelImage m;
    m.width = d.width;
    m.height = d.height;
    m.labels.resize(static_cast<std::size_t>(d.width) * d.height);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) {
            const std::uint8_t* p = d.bytes.data() + y * d.row_bytes;
            m.labels[static_cast<std::size_t>(y) * d.width + x] =
                d.bit_depth == 16 ? (p[2 * x] << 8) | p[2 * x + 1] : p[x];
        }
    return m;
}

}  // namespace pags
