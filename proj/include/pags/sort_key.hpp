#pragma once

#include <cstdint>

namespace pags {

constexpr int kSortKeyDepthBits = 24;
constexpr int kSortKeyPriorityBits = 8;

/// Packs (tile, depth, priority) so that ascending order is tile-major, then
/// nearer depth first, then higher priority first among equal quantized
/// depths. Layout: tile_id in bits 63..32, depth in 31..8, (1 - priority) in 7..0.
/// Depth is quantized on a log scale over [z_near, z_far]; depth outside the
/// range is clamped with a warning.
std::uint64_t composite_sort_key(std::uint32_t tile_id, double depth, double priority, double z_near, double z_far);

/// Same packing without the warning; sets *clamped when depth was out of range.
std::uint64_t composite_sort_key_quiet(std::uint32_t tile_id, double depth, double priority, double z_near,
                                       double z_far, bool* clamped);

}  // namespace pags
