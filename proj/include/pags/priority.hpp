#pragma once

#include "pags/rasterizer.hpp"
#include "pags/scene.hpp"

#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace pags {

struct PriorityConfig {
    double sem_threshold = 0.5;
    double opacity_threshold = 0.7;
    double alpha_solid = 0.5;   ///< minimum alpha' of a fragment that writes pre-pass depth
    double epsilon = 1e-4;      ///< relative depth tolerance of the early-Z test
    bool per_tile_max_z = false;  ///< conservative per-tile test against the tile's farthest depth
    PoseLookup lookup = PoseLookup::Nearest;
    RasterConfig raster;
};

/// Indices into a composed world (compose_world order).
struct OccluderSet {
    std::vector<std::size_t> indices;
};

/// Gaussians with s_sem > sem_threshold and opacity > opacity_threshold.
OccluderSet select_occluders(std::span<const GaussianPrimitive> world, double sem_threshold = 0.5,
                             double opacity_threshold = 0.7);

struct DepthBuffer {
    int width = 0;
    int height = 0;
    std::vector<double> depth;  ///< +inf where no occluder wrote

    DepthBuffer() = default;
    DepthBuffer(int w, int h) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, kInfinity) {}
    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }

    static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

/// Per pixel, the minimum depth of occluder fragments with alpha' >= alpha_solid.
/// Needs only splat geometry and opacity; no color is evaluated.
DepthBuffer depth_prepass(std::span<const Splat> occluders, int width, int height, double alpha_solid,
                          const RasterConfig& raster = {});

/// True when a fragment at depth d lies strictly behind z + epsilon.
inline bool early_depth_cull(double d, double z, double epsilon) { return d > z + epsilon; }

struct RenderStats {
    std::uint64_t fragments_binned = 0;   ///< sum over bins of entries x tile pixels
    std::uint64_t fragments_shaded = 0;   ///< fragments whose alpha was evaluated
    std::uint64_t fragments_culled_earlyz = 0;
    std::size_t occluders = 0;
    double prepass_ms = 0.0;
    double colorpass_ms = 0.0;
};

struct PriorityRender {
    RenderTarget target;
    RenderStats stats;
    DepthBuffer depth;
};

/// Occluder selection -> depth pre-pass -> color pass with early-Z. SH is
/// evaluated lazily, once per splat and tile, and only for fragments that
/// survive the depth test. Compositing of kept fragments is identical to
/// rasterize_forward.
PriorityRender render_priority(const SceneModel& scene, const CameraView& cam, const PriorityConfig& config = {});

/// The same color pass without a pre-pass (nothing is culled); the baseline
/// the priority pipeline is measured against.
PriorityRender render_single_pass(const SceneModel& scene, const CameraView& cam, const PriorityConfig& config = {});

/// One `key=value` line.
void write_render_stats(std::ostream& os, const RenderStats& s);

}  // namespace pags
