#include "pags/sort_key.hpp"

#include "pags/common.hpp"

#include <algorithm>
#include <cmath>

namespace pags {

std::uint64_t composite_sort_key_quiet(std::uint32_t tile_id, double depth, double priority, double z_near,
                                       double z_far, bool* clamped) {
    constexpr double kDepthMax = static_cast<double>((1u << kSortKeyDepthBits) - 1);
    constexpr double kPrioMax = static_cast<double>((1u << kSortKeyPriorityBits) - 1);
    bool out_of_range = !(depth >= z_near && depth <= z_far);
    const double d = std::isnan(depth) ? z_far : std::clamp(depth, z_near, z_far);
    if (clamped) *clamped = out_of_range;
    // logarithmic spacing: uniform relative depth resolution over the range
    const double u = std::log(d / z_near) / std::log(z_far / z_near);
    const auto qd = static_cast<std::uint64_t>(std::lround(std::clamp(u, 0.0, 1.0) * kDepthMax));
    const double p = std::clamp(std::isnan(priority) ? 0.0 : priority, 0.0, 1.0);
    const auto qp = static_cast<std::uint64_t>(std::lround((1.0 - p) * kPrioMax));
    return (static_cast<std::uint64_t>(tile_id) << 32) | (qd << kSortKeyPriorityBits) | qp;
}

std::uint64_t composite_sort_key(std::uint32_t tile_id, double depth, double priority, double z_near, double z_far) {
    bool clamped = false;
    const auto key = composite_sort_key_quiet(tile_id, depth, priority, z_near, z_far, &clamped);
    if (clamped) log_warning("sort key depth " + std::to_string(depth) + " outside [z_near, z_far]; clamped");
    return key;
}

}  // namespace pags
