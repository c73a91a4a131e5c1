#include "pags/pipeline.hpp"
#include "pags/rasterizer.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace pags {
namespace {

using testing::urand;

Splat round_splat(Vec2 mean, double sigma, double opacity, Vec3 color, double depth) {
    Splat s;
    s.mean2d = mean;
    s.cov2d = Mat2::Identity() * sigma * sigma;
    s.opacity = opacity;
    s.color = color;
    s.depth = depth;
    return s;
}

TEST(Binning, SmallSplatInsideOneTile) {
    const std::vector<Splat> s{round_splat({8, 8}, 1.0, 0.5, Vec3::Ones(), 2)};
    const auto bins = bin_to_tiles(s, 64, 64, {});
    ASSERT_EQ(bins.size(), 1u);
    EXPECT_EQ(bins[0].tile_x, 0);
    EXPECT_EQ(bins[0].tile_y, 0);
    EXPECT_EQ(bins[0].entries.size(), 1u);
}

TEST(Binning, StraddlingSplatAppearsInBothTiles) {
    const std::vector<Splat> s{round_splat({16, 8}, 1.0, 0.5, Vec3::Ones(), 2)};
    const auto bins = bin_to_tiles(s, 64, 64, {});
    ASSERT_EQ(bins.size(), 2u);
    EXPECT_EQ(bins[0].tile_x, 0);
    EXPECT_EQ(bins[1].tile_x, 1);
}

TEST(Binning, FootprintCoversEveryPixelAboveAlphaMin) {
    RasterConfig cfg;
    const Splat s = round_splat({0, 0}, 2.0, 0.9, Vec3::Ones(), 2);
    const double r = footprint_extent(s, cfg) * 2.0;
    // alpha' at the footprint edge is exactly alpha_min
    EXPECT_NEAR(0.9 * std::exp(-0.5 * r * r / 4.0), cfg.alpha_min, 1e-15);
    EXPECT_GT(footprint_extent(s, cfg), 3.0);
    Splat faint = s;
    faint.opacity = 0.5 * cfg.alpha_min;
    EXPECT_EQ(footprint_extent(faint, cfg), 0.0);
    EXPECT_TRUE(bin_to_tiles(std::vector<Splat>{faint}, 32, 32, cfg).empty());
    cfg.footprint_sigma = 3.0;
    EXPECT_EQ(footprint_extent(s, cfg), 3.0);
}

TEST(Binning, EmptyInputGivesNoBins) {
    EXPECT_TRUE(bin_to_tiles(std::vector<Splat>{}, 64, 64, {}).empty());
}

TEST(Binning, BinsCoverFootprintWithoutDuplicatesAndAreSorted) {
    std::mt19937_64 rng(21);
    const auto splats = testing::random_splats(rng, 150, 80, 72);
    RasterConfig cfg;
    const auto bins = bin_to_tiles(splats, 80, 72, cfg);
    const TileGrid grid = make_tile_grid(80, 72, cfg.tile_size);
    std::set<std::pair<std::uint32_t, int>> seen;
    for (const auto& b : bins) {
        std::set<std::uint32_t> in_bin;
        for (std::size_t k = 0; k < b.entries.size(); ++k) {
            EXPECT_TRUE(in_bin.insert(b.entries[k].splat).second);
            if (k > 0) EXPECT_LE(b.entries[k - 1].key, b.entries[k].key);
            seen.insert({b.entries[k].splat, b.tile_y * grid.tiles_x + b.tile_x});
        }
    }
    // brute force: every tile intersecting the bbox must contain the splat
    for (std::uint32_t i = 0; i < splats.size(); ++i) {
        const auto box = footprint_box(splats[i], footprint_extent(splats[i], cfg));
        for (int ty = 0; ty < grid.tiles_y; ++ty) {
            for (int tx = 0; tx < grid.tiles_x; ++tx) {
                const double x0 = tx * 16.0, y0 = ty * 16.0;
                const double x1 = std::min(x0 + 16, 80.0), y1 = std::min(y0 + 16, 72.0);
                const bool hit = box.x1 >= x0 && box.x0 < x1 && box.y1 >= y0 && box.y0 < y1;
                EXPECT_EQ(hit, seen.count({i, ty * grid.tiles_x + tx}) == 1) << i << " " << tx << " " << ty;
            }
        }
    }
}

TEST(Forward, EmptySceneIsBackground) {
    const Vec3 bg(0.2, 0.4, 0.6);
    const auto res = rasterize_forward(std::vector<Splat>{}, 20, 10, bg);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 20; ++x) EXPECT_EQ(res.target.pixel(x, y), bg);
    for (double t : res.target.transmittance) EXPECT_EQ(t, 1.0);
}

TEST(Forward, OpaqueSplatShowsItsColor) {
    const Vec3 c(0.9, 0.1, 0.3);
    const std::vector<Splat> s{round_splat({10.5, 10.5}, 3.0, 1.0, c, 2.0)};
    const auto res = rasterize_forward(s, 21, 21, Vec3(0, 1, 0));
    EXPECT_TRUE(res.target.pixel(10, 10).isApprox(c, 1e-12));
}

TEST(Forward, TwoLayerCompositingByHand) {
    // front alpha 0.5 red, back alpha 1 blue, black background:
    // C = 0.5 * red + 0.5 * 1 * blue
    const std::vector<Splat> s{round_splat({4.5, 4.5}, 2.0, 1.0, Vec3(0, 0, 1), 5.0),
                               round_splat({4.5, 4.5}, 2.0, 0.5, Vec3(1, 0, 0), 1.0)};
    const auto res = rasterize_forward(s, 9, 9, Vec3::Zero());
    EXPECT_TRUE(res.target.pixel(4, 4).isApprox(Vec3(0.5, 0, 0.5), 1e-12));
    EXPECT_NEAR(res.target.transmittance[4 * 9 + 4], 0.0, 1e-15);
}

TEST(Forward, MatchesReferenceOnRandomScenes) {
    std::mt19937_64 rng(77);
    const CameraView cam = testing::axis_camera(64, 64.0);
    const Vec3 bg(0.1, 0.2, 0.3);
    for (int scene = 0; scene < 10; ++scene) {
        std::vector<GaussianPrimitive> world;
        for (int i = 0; i < 200; ++i) world.push_back(testing::random_gaussian(rng, i, scene % 3));
        const auto a = rasterize_forward(make_splats(world, cam), 64, 64, bg);
        const auto b = reference_render(world, cam, bg);
        EXPECT_LE(testing::max_abs_diff(a.target.color, b.color), 2e-3);
    }
}

TEST(Forward, WithoutCutoffsMatchesReferenceToRoundoff) {
    std::mt19937_64 rng(78);
    RasterConfig cfg;
    cfg.alpha_min = 1e-12;
    cfg.t_stop = 0.0;
    for (int scene = 0; scene < 4; ++scene) {
        const auto splats = testing::random_splats(rng, 150, 64, 64);
        const auto a = rasterize_forward(splats, 64, 64, Vec3(0.5, 0.5, 0.5), cfg);
        const auto b = reference_render_splats(splats, 64, 64, Vec3(0.5, 0.5, 0.5));
        EXPECT_LE(testing::max_abs_diff(a.target.color, b.color), 1e-6);
    }
}

TEST(Forward, ReferenceAgreesExactlyOnEmptyAndSingle) {
    const Vec3 bg(0.3, 0.3, 0.3);
    const auto e1 = rasterize_forward(std::vector<Splat>{}, 32, 32, bg);
    const auto e2 = reference_render_splats(std::vector<Splat>{}, 32, 32, bg);
    EXPECT_EQ(e1.target.color, e2.color);
    // wide enough that alpha' stays above alpha_min over the whole image
    const std::vector<Splat> one{round_splat({16, 16}, 10.0, 0.8, Vec3(0.2, 0.7, 0.1), 3)};
    const auto s1 = rasterize_forward(one, 32, 32, bg);
    const auto s2 = reference_render_splats(one, 32, 32, bg);
    EXPECT_LE(testing::max_abs_diff(s1.target.color, s2.color), 1e-6);
}

TEST(Forward, TransmittanceNonIncreasingAndBounded) {
    std::mt19937_64 rng(8);
    const auto splats = testing::random_splats(rng, 60, 32, 32);
    // transmittance after each prefix of the splat list (sorted by depth) can only drop
    const auto full = rasterize_forward(splats, 32, 32, Vec3::Zero());
    for (double t : full.target.transmittance) {
        EXPECT_GE(t, 0.0);
        EXPECT_LE(t, 1.0);
    }
    std::vector<Splat> sorted = splats;
    std::sort(sorted.begin(), sorted.end(), [](const Splat& a, const Splat& b) { return a.depth < b.depth; });
    std::vector<double> prev(32 * 32, 1.0);
    for (std::size_t n = 1; n <= sorted.size(); n += 7) {
        const auto r = rasterize_forward(std::span(sorted).first(n), 32, 32, Vec3::Zero());
        for (std::size_t p = 0; p < prev.size(); ++p) EXPECT_LE(r.target.transmittance[p], prev[p] + 1e-15);
        prev = r.target.transmittance;
    }
}

TEST(Forward, DeterministicAcrossWorkerCounts) {
    std::mt19937_64 rng(31);
    const auto splats = testing::random_splats(rng, 200, 96, 80);
    RasterConfig one, many;
    one.workers = 1;
    many.workers = 4;
    const auto a = rasterize_forward(splats, 96, 80, Vec3(0.5, 0.5, 0.5), one);
    const auto b = rasterize_forward(splats, 96, 80, Vec3(0.5, 0.5, 0.5), many);
    EXPECT_EQ(a.target.color, b.target.color);
    std::vector<double> g(96 * 80 * 3);
    for (auto& v : g) v = urand(rng, -1, 1);
    const auto ga = rasterize_backward(a.record, g);
    const auto gb = rasterize_backward(b.record, g);
    for (std::size_t i = 0; i < ga.size(); ++i) {
        EXPECT_EQ(ga[i].mean2d, gb[i].mean2d);
        EXPECT_EQ(ga[i].cov2d, gb[i].cov2d);
        EXPECT_EQ(ga[i].opacity, gb[i].opacity);
        EXPECT_EQ(ga[i].sgrad, gb[i].sgrad);
    }
}

TEST(Forward, DegenerateCovarianceIsSkipped) {
    Splat s = round_splat({5, 5}, 1.0, 0.9, Vec3::Ones(), 2);
    s.cov2d << 1.0, 1.0, 1.0, 1.0;
    const auto res = rasterize_forward(std::vector<Splat>{s}, 10, 10, Vec3::Zero());
    for (double c : res.target.color) EXPECT_EQ(c, 0.0);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(2);
    const auto splats = testing::random_splats(rng, 30, 32, 32);
    const auto res = rasterize_forward(splats, 32, 32, Vec3::Zero());
    const auto g = rasterize_backward(res.record, std::vector<double>(32 * 32 * 3, 0.0));
    for (const auto& sg : g) {
        EXPECT_EQ(sg.mean2d, Vec2::Zero());
        EXPECT_EQ(sg.cov2d, Mat2::Zero());
        EXPECT_EQ(sg.opacity, 0.0);
        EXPECT_EQ(sg.color, Vec3::Zero());
    }
}

TEST(Backward, MismatchedGradientImageThrows) {
    const auto res = rasterize_forward(std::vector<Splat>{}, 8, 8, Vec3::Zero());
    EXPECT_THROW(rasterize_backward(res.record, std::vector<double>(10, 0.0)), DimensionError);
}

TEST(Backward, TwoLayerAlphaGradientByHand) {
    // C = a_f c_f + (1 - a_f) a_b c_b + (1 - a_f)(1 - a_b) bg
    // dC/da_f = c_f - a_b c_b - (1 - a_b) bg, dC/da_b = (1 - a_f)(c_b - bg)
    const double af = 0.5, ab = 0.6;
    const Vec3 cf(1, 0, 0), cb(0, 0, 1), bg(0.2, 0.2, 0.2);
    // splats wide enough that the centre pixel sees exp(power) ~ 1
    std::vector<Splat> s{round_splat({0.5, 0.5}, 1e4, af, cf, 1.0), round_splat({0.5, 0.5}, 1e4, ab, cb, 2.0)};
    const auto res = rasterize_forward(s, 1, 1, bg);
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> g(3, 0.0);
        g[ch] = 1.0;
        const auto grads = rasterize_backward(res.record, g);
        const Vec3 dfront = cf - ab * cb - (1 - ab) * bg;
        const Vec3 dback = (1 - af) * (cb - bg);
        EXPECT_NEAR(grads[0].opacity, dfront[ch], 1e-12);
        EXPECT_NEAR(grads[1].opacity, dback[ch], 1e-12);
        EXPECT_NEAR(grads[0].color[ch], af, 1e-12);
        EXPECT_NEAR(grads[1].color[ch], (1 - af) * ab, 1e-12);
    }
}

TEST(Backward, SplatOpacityGradientMatchesFiniteDifference) {
    std::mt19937_64 rng(14);
    const auto splats = testing::random_splats(rng, 1, 24, 24);
    std::vector<double> w(24 * 24 * 3, 0.0);
    for (std::size_t p = 0; p < 24 * 24; ++p) {
        w[3 * p + 0] = 0.2126;
        w[3 * p + 1] = 0.7152;
        w[3 * p + 2] = 0.0722;
    }
    const RasterConfig cfg = testing::smooth_raster_config();
    auto loss = [&](double opacity) {
        auto s = splats;
        s[0].opacity = opacity;
        const auto r = rasterize_forward(s, 24, 24, Vec3(0.3, 0.3, 0.3), cfg);
        double l = 0;
        for (std::size_t i = 0; i < w.size(); ++i) l += w[i] * r.target.color[i];
        return l;
    };
    const auto res = rasterize_forward(splats, 24, 24, Vec3(0.3, 0.3, 0.3), cfg);
    const double analytic = rasterize_backward(res.record, w)[0].opacity;
    const double o = splats[0].opacity, eps = 1e-4;
    const double fd = (loss(o + eps) - loss(o - eps)) / (2 * eps);
    EXPECT_NEAR(analytic, fd, 1e-3 * std::abs(fd));
}

TEST(Backward, SgradIsThreeTransmittanceSquared) {
    // single splat, alpha' at the centre pixel known, T before it is 1
    const std::vector<Splat> s{round_splat({0.5, 0.5}, 1e4, 0.4, Vec3::Ones(), 1.0),
                               round_splat({0.5, 0.5}, 1e4, 0.5, Vec3::Ones(), 2.0)};
    const auto res = rasterize_forward(s, 1, 1, Vec3::Zero());
    const auto g = rasterize_backward(res.record, std::vector<double>(3, 0.0));
    EXPECT_NEAR(g[0].sgrad, 3.0, 1e-12);
    EXPECT_NEAR(g[1].sgrad, 3.0 * 0.6 * 0.6, 1e-9);
}

SceneModel random_grad_scene(std::mt19937_64& rng, int n_static, int n_dynamic, int degree) {
    SceneModel s;
    s.background_color = Vec3(urand(rng, 0, 1), urand(rng, 0, 1), urand(rng, 0, 1));
    GaussianId id = 0;
    for (int i = 0; i < n_static; ++i) s.static_gaussians.push_back(testing::random_gaussian(rng, id++, degree));
    if (n_dynamic > 0) {
        DynamicObject obj;
        obj.object_id = 1;
        for (int i = 0; i < n_dynamic; ++i) {
            DynamicGaussian dg;
            dg.primitive = testing::random_gaussian(rng, id++, degree);
            dg.primitive.mean *= 0.3;
            dg.appearance = TimeVaryingSH::zeros(degree, 1, 2.0);
            dg.appearance.a0 = testing::random_sh(rng, degree, 1.0, 0.06);
            dg.appearance.cos_coeffs[0] = testing::random_sh(rng, degree, 0.2, 0.02);
            dg.appearance.sin_coeffs[0] = testing::random_sh(rng, degree, 0.2, 0.02);
            obj.gaussians.push_back(dg);
        }
        obj.poses.push_back({0.0, testing::random_quat(rng), Vec3(urand(rng, -.2, .2), urand(rng, -.2, .2), 3.0)});
        obj.poses.push_back({1.0, testing::random_quat(rng), Vec3(urand(rng, -.2, .2), urand(rng, -.2, .2), 3.5)});
        // keep object Gaussians in front of the camera whatever the pose rotation
        for (auto& dg : obj.gaussians) dg.primitive.mean = dg.primitive.mean.normalized() * urand(rng, 0.1, 0.6);
        s.dynamic_objects.push_back(obj);
    }
    return s;
}

TEST(Backward, ParameterGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(2024);
    int configs = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const int degree = trial % 3;
        SceneModel scene = random_grad_scene(rng, 1 + trial % 3, trial % 2 ? 2 : 0, degree);
        CameraView cam = CameraView::look_at(Vec3(urand(rng, -.3, .3), urand(rng, -.3, .3), -0.5), Vec3(0, 0, 4),
                                             Vec3(0, -1, 0), testing::square_intrinsics(20, 22));
        cam.timestamp = trial % 2 ? 0.8 : 0.1;
        FrameOptions opt;
        opt.raster = testing::smooth_raster_config();
        if (trial % 4 == 3) opt.opacity_scale.assign(scene.gaussian_count(), 1.05);
        std::vector<double> w(20 * 20 * 3);
        for (auto& v : w) v = urand(rng, -1, 1);
        const auto res = testing::check_gradients(scene, cam, opt, w);
        EXPECT_LE(res.max_rel_error, 1e-3) << "trial " << trial;
        ++configs;
    }
    EXPECT_EQ(configs, 8);
}

TEST(Pipeline, DroppedGaussiansReceiveNoGradient) {
    std::mt19937_64 rng(5);
    SceneModel scene = random_grad_scene(rng, 3, 0, 1);
    const CameraView cam = testing::axis_camera(16, 18);
    FrameOptions opt;
    opt.keep = {1, 0, 1};
    const auto fr = render_frame(scene, cam, opt);
    std::vector<double> w(16 * 16 * 3, 1.0);
    const auto g = backward_frame(scene, cam, fr, w, opt);
    EXPECT_EQ(g.static_grads[1].mean, Vec3::Zero());
    EXPECT_EQ(g.static_grads[1].opacity_logit, 0.0);
    EXPECT_EQ(g.visible[1], 0);
}

}  // namespace
}  // namespace pags
