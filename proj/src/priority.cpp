#include "pags/priority.hpp"

#include "tile_kernel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace pags {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Farthest pre-pass depth of every tile (+inf when any pixel is uncovered).
std::vector<double> tile_max_depth(const DepthBuffer& db, const TileGrid& grid) {
    std::vector<double> out(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y, 0.0);
    for (int y = 0; y < db.height; ++y)
        for (int x = 0; x < db.width; ++x) {
            double& m = out[static_cast<std::size_t>(y / grid.tile_size) * grid.tiles_x + x / grid.tile_size];
            m = std::max(m, db.at(x, y));
        }
    return out;
}

PriorityRender color_pass(const SceneModel& scene, const CameraView& cam, const PriorityConfig& config,
                          bool with_prepass) {
    PriorityRender res;
    const int width = cam.width(), height = cam.height();
    if (width < 1 || height < 1) throw DimensionError("render target must be at least 1x1");
    const auto world = compose_world(scene, cam.timestamp, config.lookup);
    std::vector<std::size_t> source;
    const auto splats = make_splats(world, cam, &source, false);
    res.depth = DepthBuffer(width, height);

    if (with_prepass) {
        const auto t0 = Clock::now();
        const OccluderSet occ = select_occluders(world, config.sem_threshold, config.opacity_threshold);
        std::vector<std::uint8_t> is_occ(world.size(), 0);
        for (std::size_t i : occ.indices) is_occ[i] = 1;
        std::vector<Splat> occluder_splats;
        for (std::size_t k = 0; k < splats.size(); ++k)
            if (is_occ[source[k]]) occluder_splats.push_back(splats[k]);
        res.stats.occluders = occ.indices.size();
        res.depth = depth_prepass(occluder_splats, width, height, config.alpha_solid, config.raster);
        res.stats.prepass_ms = ms_since(t0);
    }

    const auto t0 = Clock::now();
    const TileGrid grid = make_tile_grid(width, height, config.raster.tile_size);
    const auto bins = bin_to_tiles(splats, width, height, config.raster);
    std::vector<Vec3> conics;
    std::vector<std::uint8_t> valid;
    detail::precompute_conics(splats, conics, valid);
    res.target = RenderTarget(width, height);
    detail::fill_background(bins, grid, width, height, scene.background_color, res.target.color.data(),
                            res.target.transmittance.data());
    const detail::TileOutput out{res.target.color.data(), res.target.transmittance.data(), nullptr};

    const bool any_depth = with_prepass && res.stats.occluders > 0;
    const std::vector<double> tile_z = any_depth && config.per_tile_max_z ? tile_max_depth(res.depth, grid)
                                                                          : std::vector<double>{};
    const double eps = config.epsilon;
    std::vector<detail::FragmentCounters> counters(bins.size());
    parallel_for(bins.size(), config.raster.workers, [&](std::size_t b) {
        const TileBin& bin = bins[b];
        std::vector<Vec3> cache(bin.entries.size());
        std::vector<std::uint8_t> cached(bin.entries.size(), 0);
        auto color = [&](std::size_t k, std::uint32_t si) -> const Vec3& {
            if (!cached[k]) {
                cache[k] = splat_color(world[source[si]], cam);
                cached[k] = 1;
            }
            return cache[k];
        };
        if (!any_depth) {
            detail::composite_tile(
                bin, splats, conics, valid, grid, width, height, scene.background_color, config.raster,
                [](std::uint32_t, std::size_t) { return false; }, color, out, counters[b]);
        } else if (config.per_tile_max_z) {
            const double z = tile_z[static_cast<std::size_t>(bin.tile_y) * grid.tiles_x + bin.tile_x];
            detail::composite_tile(
                bin, splats, conics, valid, grid, width, height, scene.background_color, config.raster,
                [&](std::uint32_t si, std::size_t) { return early_depth_cull(splats[si].depth, z, eps * z); },
                color, out, counters[b]);
        } else {
            const double* zb = res.depth.depth.data();
            detail::composite_tile(
                bin, splats, conics, valid, grid, width, height, scene.background_color, config.raster,
                [&](std::uint32_t si, std::size_t pix) {
                    return early_depth_cull(splats[si].depth, zb[pix], eps * zb[pix]);
                },
                color, out, counters[b]);
        }
    });
    for (const auto& c : counters) {
        res.stats.fragments_binned += c.binned;
        res.stats.fragments_shaded += c.shaded;
        res.stats.fragments_culled_earlyz += c.culled;
    }
    res.stats.colorpass_ms = ms_since(t0);
    return res;
}

}  // namespace

OccluderSet select_occluders(std::span<const GaussianPrimitive> world, double sem_threshold,
                             double opacity_threshold) {
    OccluderSet s;
    for (std::size_t i = 0; i < world.size(); ++i) {
        if (world[i].s_sem > sem_threshold && world[i].opacity() > opacity_threshold) s.indices.push_back(i);
    }
    return s;
}

DepthBuffer depth_prepass(std::span<const Splat> occluders, int width, int height, double alpha_solid,
                          const RasterConfig& raster) {
    DepthBuffer db(width, height);
    if (occluders.empty()) return db;
    const TileGrid grid = make_tile_grid(width, height, raster.tile_size);
    const auto bins = bin_to_tiles(occluders, width, height, raster);
    std::vector<Vec3> conics;
    std::vector<std::uint8_t> valid;
    detail::precompute_conics(occluders, conics, valid);
    parallel_for(bins.size(), raster.workers, [&](std::size_t b) {
        const TileBin& bin = bins[b];
        const int x0 = bin.tile_x * grid.tile_size, y0 = bin.tile_y * grid.tile_size;
        const int x1 = std::min(width, x0 + grid.tile_size), y1 = std::min(height, y0 + grid.tile_size);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                double& z = db.depth[static_cast<std::size_t>(y) * width + x];
                for (const auto& e : bin.entries) {
                    const Splat& s = occluders[e.splat];
                    if (!valid[e.splat] || s.depth >= z) continue;
                    const double a = s.opacity * std::exp(detail::splat_power(s, conics[e.splat], x + 0.5, y + 0.5));
                    if (a >= alpha_solid) z = s.depth;
                }
            }
    });
    return db;
}

PriorityRender render_priority(const SceneModel& scene, const CameraView& cam, const PriorityConfig& config) {
    return color_pass(scene, cam, config, true);
}

PriorityRender render_single_pass(const SceneModel& scene, const CameraView& cam, const PriorityConfig& config) {
    return color_pass(scene, cam, config, false);
}

void write_render_stats(std::ostream& os, const RenderStats& s) {
    os << "fragments_binned=" << s.fragments_binned << " fragments_shaded=" << s.fragments_shaded
       << " fragments_culled_earlyz=" << s.fragments_culled_earlyz << " occluders=" << s.occluders
       << " prepass_ms=" << s.prepass_ms << " colorpass_ms=" << s.colorpass_ms << '\n';
}

}  // namespace pags
