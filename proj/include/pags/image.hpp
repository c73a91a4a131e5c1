#pragma once

#include "pags/common.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pags {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  ///< H*W*3 in [0,1]
};

struct LabelImage {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;  ///< H*W
};

/// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to the nearest code;
/// no transfer function is applied.
void write_png(const std::string& path, int width, int height, std::span<const double> rgb);

/// Any PNG; gray is expanded to RGB, alpha dropped, 16-bit reduced to 8.
RgbImage read_png(const std::string& path);

/// Single-channel label PNG, 8-bit when every label fits, else 16-bit.
/// Throws ConfigError for labels outside [0, 65535].
void write_label_png(const std::string& path, int width, int height, std::span<const std::int32_t> labels);

/// 8- or 16-bit single-channel PNG. Throws ParseError for other layouts.
LabelImage read_label_png(const std::string& path);

}  // namespace pags
