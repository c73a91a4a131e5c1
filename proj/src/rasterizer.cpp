#include "pags/rasterizer.hpp"

#include "pags/sort_key.hpp"
#include "tile_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pags {

RenderTarget::RenderTarget(int w, int h)
    : width(w),
      height(h),
      color(static_cast<std::size_t>(w) * h * 3, 0.0),
      transmittance(static_cast<std::size_t>(w) * h, 1.0) {}

Vec3 RenderTarget::pixel(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return Vec3(color[i], color[i + 1], color[i + 2]);
}

TileGrid make_tile_grid(int width, int height, int tile_size) {
    if (tile_size <= 0) throw ConfigError("tile_size must be positive");
    TileGrid g;
    g.tile_size = tile_size;
    g.tiles_x = (width + tile_size - 1) / tile_size;
    g.tiles_y = (height + tile_size - 1) / tile_size;
    return g;
}

double footprint_extent(const Splat& s, const RasterConfig& config) {
    if (config.footprint_sigma > 0.0) return config.footprint_sigma;
    if (config.alpha_min <= 0.0) throw ConfigError("opacity-aware footprint requires alpha_min > 0");
    // support of alpha' >= alpha_min: opacity * exp(-r^2 / 2) >= alpha_min
    if (s.opacity <= config.alpha_min) return 0.0;
    return std::sqrt(2.0 * std::log(s.opacity / config.alpha_min));
}

FootprintBox footprint_box(const Splat& s, double sigma) {
    // axis-aligned box of the ellipse {d : d^T cov^-1 d <= sigma^2}
    const double rx = sigma * std::sqrt(std::max(0.0, s.cov2d(0, 0)));
    const double ry = sigma * std::sqrt(std::max(0.0, s.cov2d(1, 1)));
    return {s.mean2d.x() - rx, s.mean2d.y() - ry, s.mean2d.x() + rx, s.mean2d.y() + ry};
}

std::optional<Vec3> conic_of(const Mat2& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0) || !(cov(0, 0) > 0.0) || !std::isfinite(det)) return std::nullopt;
    const double inv = 1.0 / det;
    return Vec3(cov(1, 1) * inv, -0.5 * (cov(0, 1) + cov(1, 0)) * inv, cov(0, 0) * inv);
}

std::vector<TileBin> bin_to_tiles(std::span<const Splat> splats, int width, int height, const RasterConfig& config) {
    const TileGrid grid = make_tile_grid(width, height, config.tile_size);
    const std::size_t tile_count = static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y;
    std::vector<std::vector<BinEntry>> per_tile(tile_count);
    bool any_clamped = false;
    const double ts = grid.tile_size;
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Splat& s = splats[i];
        const double extent = footprint_extent(s, config);
        if (extent <= 0.0) continue;
        const FootprintBox box = footprint_box(s, extent);
        if (!(box.x1 >= 0.0 && box.y1 >= 0.0 && box.x0 < width && box.y0 < height)) continue;
        const int tx0 = std::max(0, static_cast<int>(std::floor(box.x0 / ts)));
        const int ty0 = std::max(0, static_cast<int>(std::floor(box.y0 / ts)));
        const int tx1 = std::min(grid.tiles_x - 1, static_cast<int>(std::floor(box.x1 / ts)));
        const int ty1 = std::min(grid.tiles_y - 1, static_cast<int>(std::floor(box.y1 / ts)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                const auto tile_id = static_cast<std::uint32_t>(ty * grid.tiles_x + tx);
                bool clamped = false;
                const auto key =
                    composite_sort_key_quiet(tile_id, s.depth, s.priority, kZNear, config.z_far, &clamped);
                any_clamped |= clamped;
                per_tile[tile_id].push_back({static_cast<std::uint32_t>(i), key});
            }
        }
    }
    if (any_clamped) log_warning("splat depth outside [z_near, z_far]; sort keys clamped");

    std::vector<TileBin> bins;
    for (std::size_t t = 0; t < tile_count; ++t) {
        if (per_tile[t].empty()) continue;
        TileBin b;
        b.tile_x = static_cast<int>(t % grid.tiles_x);
        b.tile_y = static_cast<int>(t / grid.tiles_x);
        b.entries = std::move(per_tile[t]);
        bins.push_back(std::move(b));
    }
    parallel_for(bins.size(), config.workers, [&](std::size_t b) {
        auto& e = bins[b].entries;
        std::sort(e.begin(), e.end(), [](const BinEntry& l, const BinEntry& r) {
            return l.key != r.key ? l.key < r.key : l.splat < r.splat;
        });
    });
    return bins;
}

ForwardResult rasterize_forward(std::span<const Splat> splats, int width, int height, const Vec3& background,
                                const RasterConfig& config) {
    if (width < 1 || height < 1) throw DimensionError("render target must be at least 1x1");
    ForwardResult res;
    res.target = RenderTarget(width, height);
    ForwardRecord& rec = res.record;
    rec.width = width;
    rec.height = height;
    rec.grid = make_tile_grid(width, height, config.tile_size);
    rec.config = config;
    rec.background = background;
    rec.splats.assign(splats.begin(), splats.end());
    rec.bins = bin_to_tiles(splats, width, height, config);
    rec.processed.assign(static_cast<std::size_t>(width) * height, 0);

    std::vector<Vec3> conics;
    std::vector<std::uint8_t> valid;
    detail::precompute_conics(splats, conics, valid);

    auto& target = res.target;
    detail::fill_background(rec.bins, rec.grid, width, height, background, target.color.data(),
                            target.transmittance.data());
    const detail::TileOutput out{target.color.data(), target.transmittance.data(), rec.processed.data()};
    parallel_for(rec.bins.size(), config.workers, [&](std::size_t b) {
        detail::FragmentCounters counters;
        detail::composite_tile(
            rec.bins[b], splats, conics, valid, rec.grid, width, height, background, config,
            [](std::uint32_t, std::size_t) { return false; },
            [&](std::size_t, std::uint32_t si) -> const Vec3& { return splats[si].color; }, out, counters);
    });
    return res;
}

namespace {

struct Fragment {
    std::size_t entry;
    double alpha;
    double t_before;
    double dx;
    double dy;
    double gaussian;  // exp(power)
};

}  // namespace

std::vector<SplatGrad> rasterize_backward(const ForwardRecord& rec, std::span<const double> dL_dcolor) {
    const std::size_t pixels = static_cast<std::size_t>(rec.width) * rec.height;
    if (dL_dcolor.size() != pixels * 3 || rec.processed.size() != pixels) {
        throw DimensionError("rasterize_backward: gradient image does not match the forward record");
    }
    const auto& splats = rec.splats;
    std::vector<Vec3> conics;
    std::vector<std::uint8_t> valid;
    detail::precompute_conics(splats, conics, valid);

    // per-bin partial gradients aligned with bin entries, reduced in bin order
    struct ConicGrad {
        Vec2 mean2d = Vec2::Zero();
        Vec3 conic = Vec3::Zero();  // dL/d(a, b, c) with b counted once
        double opacity = 0.0;
        Vec3 color = Vec3::Zero();
        double sgrad = 0.0;
    };
    std::vector<std::vector<ConicGrad>> partial(rec.bins.size());

    parallel_for(rec.bins.size(), rec.config.workers, [&](std::size_t b) {
        const TileBin& bin = rec.bins[b];
        auto& acc = partial[b];
        acc.assign(bin.entries.size(), ConicGrad{});
        const int x0 = bin.tile_x * rec.grid.tile_size;
        const int y0 = bin.tile_y * rec.grid.tile_size;
        const int x1 = std::min(rec.width, x0 + rec.grid.tile_size);
        const int y1 = std::min(rec.height, y0 + rec.grid.tile_size);
        std::vector<Fragment> frags;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * rec.width + x;
                const double px = x + 0.5, py = y + 0.5;
                const Vec3 g(dL_dcolor[3 * pix], dL_dcolor[3 * pix + 1], dL_dcolor[3 * pix + 2]);
                // replay the forward loop
                frags.clear();
                double t = 1.0;
                const std::size_t n = rec.processed[pix];
                for (std::size_t k = 0; k < n; ++k) {
                    const std::uint32_t si = bin.entries[k].splat;
                    if (!valid[si]) continue;
                    const Splat& s = splats[si];
                    const double power = detail::splat_power(s, conics[si], px, py);
                    const double gauss = std::exp(power);
                    const double alpha = s.opacity * gauss;
                    if (alpha < rec.config.alpha_min) continue;
                    frags.push_back({k, alpha, t, px - s.mean2d.x(), py - s.mean2d.y(), gauss});
                    t *= (1.0 - alpha);
                    if (t < rec.config.t_stop) break;
                }
                // S = color seen from just behind the current fragment
                Vec3 behind = rec.background;
                for (auto it = frags.rbegin(); it != frags.rend(); ++it) {
                    const std::uint32_t si = bin.entries[it->entry].splat;
                    const Splat& s = splats[si];
                    ConicGrad& a = acc[it->entry];
                    a.color += (it->alpha * it->t_before) * g;
                    const double dL_dalpha = it->t_before * (s.color - behind).dot(g);
                    a.opacity += it->gaussian * dL_dalpha;
                    const double dL_dpower = it->alpha * dL_dalpha;
                    const Vec3& q = conics[si];
                    // d power / d mean = Q d
                    a.mean2d += dL_dpower * Vec2(q[0] * it->dx + q[1] * it->dy, q[1] * it->dx + q[2] * it->dy);
                    a.conic += (-0.5 * dL_dpower) * Vec3(it->dx * it->dx, 2.0 * it->dx * it->dy, it->dy * it->dy);
                    a.sgrad += 3.0 * it->t_before * it->t_before;
                    behind = it->alpha * s.color + (1.0 - it->alpha) * behind;
                }
            }
        }
    });

    std::vector<ConicGrad> total(splats.size());
    for (std::size_t b = 0; b < rec.bins.size(); ++b) {
        const auto& bin = rec.bins[b];
        for (std::size_t k = 0; k < bin.entries.size(); ++k) {
            const auto& p = partial[b][k];
            auto& t = total[bin.entries[k].splat];
            t.mean2d += p.mean2d;
            t.conic += p.conic;
            t.opacity += p.opacity;
            t.color += p.color;
            t.sgrad += p.sgrad;
        }
    }

    std::vector<SplatGrad> grads(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        SplatGrad& out = grads[i];
        out.mean2d = total[i].mean2d;
        out.opacity = total[i].opacity;
        out.color = total[i].color;
        out.sgrad = total[i].sgrad;
        if (!valid[i]) continue;
        const Vec3& q = conics[i];
        Mat2 Q;
        Q << q[0], q[1], q[1], q[2];
        // full symmetric gradient w.r.t. Q: off-diagonals share the b gradient
        Mat2 gq;
        gq << total[i].conic[0], 0.5 * total[i].conic[1], 0.5 * total[i].conic[1], total[i].conic[2];
        out.cov2d = -Q * gq * Q;
    }
    return grads;
}

namespace {

/// Global-depth-order compositing of every splat at every pixel. `weight`
/// (optional, H*W) receives sum alpha T over the splats with flagged[i] != 0.
RenderTarget reference_composite(std::span<const Splat> splats, int width, int height, const Vec3& background,
                                 std::span<const std::uint8_t> flagged, double* weight) {
    RenderTarget target(width, height);
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return splats[a].depth < splats[b].depth; });
    std::vector<Vec3> conics;
    std::vector<std::uint8_t> valid;
    detail::precompute_conics(splats, conics, valid);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double t = 1.0, w = 0.0;
            Vec3 c = Vec3::Zero();
            for (const std::size_t i : order) {
                if (!valid[i]) continue;
                const Splat& s = splats[i];
                const double alpha = s.opacity * std::exp(detail::splat_power(s, conics[i], px, py));
                c += (alpha * t) * s.color;
                if (weight && flagged[i]) w += alpha * t;
                t *= (1.0 - alpha);
            }
            c += t * background;
            const std::size_t pix = static_cast<std::size_t>(y) * width + x;
            target.color[3 * pix + 0] = c.x();
            target.color[3 * pix + 1] = c.y();
            target.color[3 * pix + 2] = c.z();
            target.transmittance[pix] = t;
            if (weight) weight[pix] = w;
        }
    }
    return target;
}

}  // namespace

RenderTarget reference_render_splats(std::span<const Splat> splats, int width, int height, const Vec3& background) {
    return reference_composite(splats, width, height, background, {}, nullptr);
}

std::vector<double> reference_coverage(std::span<const Splat> splats, std::span<const std::uint8_t> flagged,
                                       int width, int height) {
    if (flagged.size() != splats.size()) throw DimensionError("reference_coverage: one flag per splat required");
    std::vector<double> w(static_cast<std::size_t>(width) * height, 0.0);
    reference_composite(splats, width, height, Vec3::Zero(), flagged, w.data());
    return w;
}

Vec3 splat_color(const GaussianPrimitive& g, const CameraView& cam) {
    return evaluate_sh(g.sh, (g.mean - cam.camera_center()).normalized(), g.sh_degree());
}

std::vector<Splat> make_splats(std::span<const GaussianPrimitive> world, const CameraView& cam,
                               std::vector<std::size_t>* source, bool resolve_color) {
    std::vector<Splat> splats;
    splats.reserve(world.size());
    if (source) source->clear();
    for (std::size_t i = 0; i < world.size(); ++i) {
        const auto& g = world[i];
        const ProjectedGaussian p = project_gaussian(g, cam);
        if (p.culled) continue;
        Splat s;
        s.mean2d = p.mean2d;
        s.cov2d = p.cov2d;
        s.depth = p.depth;
        s.opacity = g.opacity();
        s.priority = g.s_sem;
        if (resolve_color) s.color = splat_color(g, cam);
        splats.push_back(s);
        if (source) source->push_back(i);
    }
    return splats;
}

RenderTarget reference_render(std::span<const GaussianPrimitive> world, const CameraView& cam, const Vec3& background) {
    const auto splats = make_splats(world, cam);
    return reference_render_splats(splats, cam.width(), cam.height(), background);
}

}  // namespace pags
