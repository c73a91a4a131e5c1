#pragma once

#include "pags/common.hpp"
#include "pags/scene.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pags {

/// Compositing and binning constants shared by every render path.
struct RasterConfig {
    double alpha_min = 1.0 / 4096.0;  ///< fragments with alpha' below this are skipped
    double t_stop = 1e-4;            ///< per-pixel termination threshold on transmittance
    int tile_size = 16;
    /// Bounding box half-extent in standard deviations. 0 selects the
    /// opacity-aware extent sqrt(2 ln(opacity / alpha_min)), the exact region
    /// where alpha' >= alpha_min.
    double footprint_sigma = 0.0;
    double z_far = 1000.0;           ///< upper end of the sort-key depth range
    int workers = 0;                 ///< 0 = hardware concurrency
};

/// A projected Gaussian ready for compositing.
struct Splat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 1.0;
    double opacity = 0.0;  ///< effective opacity in [0,1]
    Vec3 color = Vec3::Zero();
    double priority = 0.0;  ///< semantic priority used by the sort key, in [0,1]
};

struct RenderTarget {
    int width = 0;
    int height = 0;
    std::vector<double> color;          ///< H*W*3, row-major RGB
    std::vector<double> transmittance;  ///< H*W
    std::optional<std::vector<double>> depth;  ///< H*W when a pass produces one

    RenderTarget() = default;
    RenderTarget(int w, int h);

    Vec3 pixel(int x, int y) const;
};

struct BinEntry {
    std::uint32_t splat = 0;
    std::uint64_t key = 0;
};

/// Splats overlapping one tile; entries sorted ascending by key then splat.
struct TileBin {
    int tile_x = 0;
    int tile_y = 0;
    std::vector<BinEntry> entries;
};

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    int tile_size = 16;
};

TileGrid make_tile_grid(int width, int height, int tile_size);

/// Pixel-space bounding box of the footprint ellipse, [min, max] inclusive.
struct FootprintBox {
    double x0, y0, x1, y1;
};
FootprintBox footprint_box(const Splat& s, double sigma);

/// Footprint half-extent (in standard deviations) used for binning `s`;
/// 0 means the splat can never reach alpha_min and is not binned.
double footprint_extent(const Splat& s, const RasterConfig& config);

/// Assigns each splat to every tile its footprint bounding box intersects and
/// sorts each bin. Only non-empty bins are returned, ordered by tile id.
std::vector<TileBin> bin_to_tiles(std::span<const Splat> splats, int width, int height, const RasterConfig& config);

/// Inverse covariance packed as (a, b, c) for [[a, b], [b, c]]. Returns
/// nullopt for degenerate (non positive-definite) covariances.
std::optional<Vec3> conic_of(const Mat2& cov2d);

/// State needed by the backward pass. Bins and splats are kept by value so a
/// record is self-contained.
struct ForwardRecord {
    int width = 0;
    int height = 0;
    TileGrid grid;
    RasterConfig config;
    Vec3 background = Vec3::Zero();
    std::vector<Splat> splats;
    std::vector<TileBin> bins;
    std::vector<std::uint32_t> processed;  ///< per pixel: bin entries visited before termination
};

struct ForwardResult {
    RenderTarget target;
    ForwardRecord record;
};

/// Front-to-back tile compositing:
/// alpha' = opacity * exp(-0.5 d^T cov2d^-1 d), C = sum alpha' T c + T_final * background.
ForwardResult rasterize_forward(std::span<const Splat> splats, int width, int height, const Vec3& background,
                                const RasterConfig& config = {});

/// Gradients w.r.t. every splat's screen-space parameters.
struct SplatGrad {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();  ///< full symmetric-matrix gradient
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    /// sum over pixels of ||dC/d(alpha' c)||^2 = 3 T^2 for every composited fragment
    double sgrad = 0.0;
};

/// Backward pass of rasterize_forward. dL_dcolor has H*W*3 entries.
/// Throws DimensionError when it does not match the record.
std::vector<SplatGrad> rasterize_backward(const ForwardRecord& record, std::span<const double> dL_dcolor);

/// Brute-force oracle: every pixel composites every splat in global depth
/// order with no tiles, no alpha cutoff and no early termination.
RenderTarget reference_render_splats(std::span<const Splat> splats, int width, int height, const Vec3& background);

/// Per pixel, the compositing weight sum(alpha' T) of the flagged splats in the
/// reference order: the fraction of the pixel they cover.
std::vector<double> reference_coverage(std::span<const Splat> splats, std::span<const std::uint8_t> flagged,
                                       int width, int height);

/// Splats for world-frame Gaussians as seen from `cam`. Gaussians behind the
/// near plane are dropped; `source` (if given) receives the input index of
/// every returned splat. With `resolve_color` false the SH is not evaluated
/// and colors stay zero.
std::vector<Splat> make_splats(std::span<const GaussianPrimitive> world, const CameraView& cam,
                               std::vector<std::size_t>* source = nullptr, bool resolve_color = true);

/// View-dependent color of `g` seen from `cam`.
Vec3 splat_color(const GaussianPrimitive& g, const CameraView& cam);

/// reference_render_splats over make_splats(world, cam).
RenderTarget reference_render(std::span<const GaussianPrimitive> world, const CameraView& cam, const Vec3& background);

}  // namespace pags
