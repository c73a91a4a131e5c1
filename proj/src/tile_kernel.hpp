#pragma once

// Per-tile compositing loop shared by the differentiable rasterizer and the
// priority color pass. Both must produce bit-identical pixels for the same
// kept fragments, so the arithmetic lives in exactly one place.

#include "pags/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

namespace pags::detail {

struct FragmentCounters {
    std::uint64_t binned = 0;
    std::uint64_t shaded = 0;
    std::uint64_t culled = 0;
};

struct TileOutput {
    double* color = nullptr;               // H*W*3
    double* transmittance = nullptr;       // H*W
    std::uint32_t* processed = nullptr;    // H*W, may be null
};

/// Screen-space Gaussian falloff at pixel centre (px, py); returns the exponent.
inline double splat_power(const Splat& s, const Vec3& conic, double px, double py) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    return -0.5 * (conic[0] * dx * dx + 2.0 * conic[1] * dx * dy + conic[2] * dy * dy);
}

/// `cull(splat, pixel_index)` returns true to discard a fragment before any
/// shading; `color(entry_pos, splat)` resolves the fragment color and is
/// called only for fragments that are composited.
template <typename CullFn, typename ColorFn>
void composite_tile(const TileBin& bin, std::span<const Splat> splats, std::span<const Vec3> conics,
                    std::span<const std::uint8_t> valid, const TileGrid& grid, int width, int height,
                    const Vec3& background, const RasterConfig& cfg, CullFn&& cull, ColorFn&& color,
                    const TileOutput& out, FragmentCounters& counters) {
    const int x0 = bin.tile_x * grid.tile_size;
    const int y0 = bin.tile_y * grid.tile_size;
    const int x1 = std::min(width, x0 + grid.tile_size);
    const int y1 = std::min(height, y0 + grid.tile_size);
    const std::size_t n = bin.entries.size();
    counters.binned += static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>((x1 - x0) * (y1 - y0));

    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                                    static_cast<std::size_t>(x);
            const double px = x + 0.5;
            const double py = y + 0.5;
            double t = 1.0;
            Vec3 c = Vec3::Zero();
            std::uint32_t visited = 0;
            for (std::size_t k = 0; k < n; ++k) {
                visited = static_cast<std::uint32_t>(k + 1);
                const std::uint32_t si = bin.entries[k].splat;
                if (cull(si, pix)) {
                    ++counters.culled;
                    continue;
                }
                ++counters.shaded;
                if (!valid[si]) continue;
                const Splat& s = splats[si];
                const double alpha = s.opacity * std::exp(splat_power(s, conics[si], px, py));
                if (alpha < cfg.alpha_min) continue;
                c += (alpha * t) * color(k, si);
                t *= (1.0 - alpha);
                if (t < cfg.t_stop) break;
            }
            c += t * background;
            out.color[3 * pix + 0] = c.x();
            out.color[3 * pix + 1] = c.y();
            out.color[3 * pix + 2] = c.z();
            out.transmittance[pix] = t;
            if (out.processed) out.processed[pix] = visited;
        }
    }
}

/// Fills every pixel of tiles that have no bin with the background.
inline void fill_background(std::span<const TileBin> bins, const TileGrid& grid, int width, int height,
                            const Vec3& background, double* color, double* transmittance) {
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y, 0);
    for (const auto& b : bins) covered[static_cast<std::size_t>(b.tile_y) * grid.tiles_x + b.tile_x] = 1;
    for (int ty = 0; ty < grid.tiles_y; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            if (covered[static_cast<std::size_t>(ty) * grid.tiles_x + tx]) continue;
            for (int y = ty * grid.tile_size; y < std::min(height, (ty + 1) * grid.tile_size); ++y) {
                for (int x = tx * grid.tile_size; x < std::min(width, (tx + 1) * grid.tile_size); ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                    color[3 * pix + 0] = background.x();
                    color[3 * pix + 1] = background.y();
                    color[3 * pix + 2] = background.z();
                    transmittance[pix] = 1.0;
                }
            }
        }
    }
}

/// Conics and validity flags for a splat list.
inline void precompute_conics(std::span<const Splat> splats, std::vector<Vec3>& conics,
                              std::vector<std::uint8_t>& valid) {
    conics.assign(splats.size(), Vec3::Zero());
    valid.assign(splats.size(), 0);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        if (auto c = conic_of(splats[i].cov2d)) {
            conics[i] = *c;
            valid[i] = 1;
        }
    }
}

}  // namespace pags::detail
