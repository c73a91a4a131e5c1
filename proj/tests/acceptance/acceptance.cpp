#include "pags/metrics.hpp"
#include "pags/optimizer.hpp"
#include "pags/ply.hpp"
#include "pags/priority.hpp"
#include "pags/semantic.hpp"
#include "pags/synth.hpp"
#include "../test_helpers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace pags;
using testing::urand;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

bool near(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------

Outcome equations() {
    Outcome o;
    const auto t0 = Clock::now();
    o.require(near(hybrid_score(1.0, 0.0, 0.4), 0.4), "hybrid(1,0,0.4)");
    for (double a : {0.0, 0.3, 0.4, 1.0}) o.require(near(hybrid_score(0.5, 0.5, a), 0.5), "hybrid(0.5,0.5,a)");
    o.require(near(hybrid_score(1.0, 0.5, 0.4), 0.7), "hybrid(1,0.5,0.4)");
    o.require(near(dropout_probability(1.0, 100, 100, 0.5, 0.25), 0.125), "D(s=1)");
    o.require(near(dropout_probability(0.0, 100, 100, 0.5, 0.25), 0.25), "D(s=0)");
    o.require(dropout_probability(0.7, 0, 100, 0.5, 0.25) == 0.0, "D(t=0)");
    o.require(near(compensation_factor(0.125), 1.142857142857143), "comp(0.125)");
    o.require(compensation_factor(0.0) == 1.0, "comp(0)");

    std::size_t checks = 0;
    bool affine = true, monotone = true, guard = true;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) {
            const double alpha = i / 49.0, g = j / 49.0, h0 = hybrid_score(0.0, g, alpha);
            for (double s : {0.25, 0.5, 1.0}) affine = affine && near(hybrid_score(s, g, alpha), h0 + alpha * s);
            const double s = i / 49.0, t = 1000.0 * j / 49.0;
            for (double beta : {0.0, 0.5, 1.0})
                for (double gamma : {0.25, 0.999}) {
                    const double d = dropout_probability(s, t, 1000.0, beta, gamma);
                    if (i > 0) monotone = monotone && d <= dropout_probability((i - 1) / 49.0, t, 1000.0, beta, gamma);
                    if (j > 0)
                        monotone = monotone && d >= dropout_probability(s, 1000.0 * (j - 1) / 49.0, 1000.0, beta, gamma);
                    guard = guard && d >= 0.0 && d < 1.0 && std::isfinite(compensation_factor(d));
                    ++checks;
                }
        }
    bool rejects = true;
    for (double bad : {1.0, 1.5, -0.1}) {
        try {
            compensation_factor(bad);
            rejects = false;
        } catch (const ConfigError&) {
        }
    }
    o.require(affine, "hybrid not affine in s_sem");
    o.require(monotone, "dropout not monotone");
    o.require(guard && rejects, "D<1 domain guard");
    const double secs = seconds_since(t0);
    o.require(secs < 1.0, "runtime");
    o.note(std::to_string(checks) + " grid points, " + fmt("%.3f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

Outcome oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int scene = 0; scene < 50; ++scene) {
        SceneModel s;
        s.background_color = Vec3(urand(rng, 0, 1), urand(rng, 0, 1), urand(rng, 0, 1));
        const int n = 1 + static_cast<int>(rng() % 200);
        for (int i = 0; i < n; ++i) s.static_gaussians.push_back(testing::random_gaussian(rng, i, scene % 3));
        const CameraView cam = CameraView::look_at(Vec3(urand(rng, -.5, .5), urand(rng, -.5, .5), 0.0),
                                                   Vec3(0, 0, 4), Vec3(0, -1, 0),
                                                   testing::square_intrinsics(64, urand(rng, 48, 80)));
        const FrameRender fr = render_frame(s, cam);
        const RenderTarget ref = reference_render(compose_world(s, cam.timestamp), cam, s.background_color);
        worst = std::max(worst, testing::max_abs_diff(fr.forward.target.color, ref.color));
    }
    const double secs = seconds_since(t0);
    o.require(worst <= 2e-3, "max error " + fmt("%.3g", worst));
    o.require(secs < 30.0, "runtime");
    o.note("50 scenes, max per-channel error " + fmt("%.3g", worst) + ", " + fmt("%.1f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

SceneModel grad_scene(std::mt19937_64& rng, int n_static, int n_dynamic, int degree) {
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
            dg.primitive.mean = dg.primitive.mean.normalized() * urand(rng, 0.1, 0.6);
            dg.appearance = TimeVaryingSH::zeros(degree, 1, 2.0);
            dg.appearance.a0 = testing::random_sh(rng, degree, 1.0, 0.06);
            dg.appearance.cos_coeffs[0] = testing::random_sh(rng, degree, 0.2, 0.02);
            dg.appearance.sin_coeffs[0] = testing::random_sh(rng, degree, 0.2, 0.02);
            obj.gaussians.push_back(dg);
        }
        obj.poses.push_back({0.0, testing::random_quat(rng), Vec3(urand(rng, -.2, .2), urand(rng, -.2, .2), 3.0)});
        obj.poses.push_back({1.0, testing::random_quat(rng), Vec3(urand(rng, -.2, .2), urand(rng, -.2, .2), 3.5)});
        s.dynamic_objects.push_back(obj);
    }
    return s;
}

Outcome gradients() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(31);
    double worst = 0.0;
    std::size_t params = 0, per_class[7] = {};
    const int configs = 24;
    for (int c = 0; c < configs; ++c) {
        const int degree = c % 3;
        const SceneModel scene = grad_scene(rng, 1 + c % 3, c % 2 ? 2 : 0, degree);
        CameraView cam = CameraView::look_at(Vec3(urand(rng, -.3, .3), urand(rng, -.3, .3), -0.5), Vec3(0, 0, 4),
                                             Vec3(0, -1, 0), testing::square_intrinsics(20, 22));
        cam.timestamp = c % 2 ? 0.8 : 0.1;
        FrameOptions opt;
        opt.raster = testing::smooth_raster_config();
        if (c % 4 == 3) opt.opacity_scale.assign(scene.gaussian_count(), 1.05);
        std::vector<double> w(20 * 20 * 3);
        for (auto& v : w) v = urand(rng, -1, 1);
        const auto r = testing::check_gradients(scene, cam, opt, w, 1e-4);
        worst = std::max(worst, r.max_rel_error);
        params += r.checked;
        for (int k = 0; k < 7; ++k) per_class[k] += r.per_class[k];
    }
    const double secs = seconds_since(t0);
    o.require(worst <= 1e-3, "max relative error " + fmt("%.3g", worst));
    for (ParamClass pc : {ParamClass::Position, ParamClass::Scale, ParamClass::Rotation, ParamClass::Opacity,
                          ParamClass::Appearance})
        o.require(per_class[static_cast<int>(pc)] > 0, "parameter class not covered");
    o.require(secs < 60.0, "runtime");
    o.note(std::to_string(configs) + " configurations, " + std::to_string(params) + " parameters, max rel error " +
           fmt("%.3g", worst) + ", " + fmt("%.1f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

SceneModel flat_scene(std::size_t n, double s_sem, double opacity) {
    SceneModel s;
    for (std::size_t i = 0; i < n; ++i) {
        GaussianPrimitive g;
        g.id = static_cast<GaussianId>(i);
        g.mean = Vec3(0, 0, 5);
        g.opacity_logit = logit(opacity);
        g.s_sem = s_sem;
        s.static_gaussians.push_back(g);
    }
    return s;
}

Outcome dropout_statistics() {
    Outcome o;
    const auto t0 = Clock::now();
    struct Case {
        double s_sem, t_frac, expected;
    };
    const Case cases[] = {{0.0, 0.2, 0.05}, {1.0, 1.0, 0.125}, {0.08, 1.0, 0.24}};
    TrainConfig cfg;
    const double opacity = 0.5;
    for (const Case& c : cases) {
        SceneModel scene = flat_scene(1000, c.s_sem, opacity);
        ImportanceState state = ImportanceState::from_scene(scene, cfg.alpha);
        std::mt19937_64 rng(42);
        std::size_t dropped = 0, n = 0;
        double sum = 0.0, sum2 = 0.0;
        for (int rep = 0; rep < 100; ++rep) {
            const DropoutSample d = apply_dropout(scene, state, cfg, 1000 * c.t_frac, 1000, rng);
            dropped += d.dropped;
            for (std::size_t i = 0; i < d.keep.size(); ++i) {
                const double eff = d.keep[i] ? d.compensation[i] * opacity : 0.0;
                sum += eff;
                sum2 += eff * eff;
                ++n;
            }
        }
        const double p = c.expected;
        o.require(near(dropout_probability(c.s_sem, c.t_frac, 1.0, cfg.beta, cfg.gamma), p), "D value");
        const double frac = static_cast<double>(dropped) / n, sigma = std::sqrt(p * (1 - p) / n);
        const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
        o.require(std::abs(frac - p) < 3 * sigma, "drop fraction at D=" + fmt("%g", p));
        o.require(std::abs(mean - opacity) < 3 * se, "biased at D=" + fmt("%g", p));
        o.note("D=" + fmt("%g", p) + ": " + fmt("%.5f", frac) + " (" + fmt("%.2f", (frac - p) / sigma) + " sigma)");
    }
    const double secs = seconds_since(t0);
    o.require(secs < 10.0, "runtime");
    o.note("1e5 trials each, " + fmt("%.2f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

struct Toy {
    SynthScene truth;
    SceneModel init;
};

Toy toy(int count, int size, int views, std::uint64_t seed) {
    SynthOptions opt;
    opt.layout = "random";
    opt.count = count;
    opt.size = size;
    opt.views = views;
    opt.seed = seed;
    Toy t{synth_scene(opt), {}};
    t.init = perturbed_init(t.truth.scene, seed + 100);
    return t;
}

Outcome pruning_schedule() {
    Outcome o;
    const auto t0 = Clock::now();
    const Toy t = toy(60, 16, 2, 3);
    TrainConfig cfg;
    cfg.raster.workers = 1;
    cfg.seed = 9;
    const TrainResult r = train(t.init, t.truth.views, cfg);
    const int iters[] = {1000, 1500, 2000, 2500, 3000};
    const double rates[] = {0.6, 0.6, 0.6, 0.3, 0.3};
    o.require(r.prune_events.size() == 5, std::to_string(r.prune_events.size()) + " prune events");
    std::string seen;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, r.prune_events.size()); ++i) {
        const PruneEvent& e = r.prune_events[i];
        const auto k = static_cast<std::size_t>(std::ceil(e.rate * e.count_before - 1e-9));
        o.require(e.iteration == iters[i] && e.rate == rates[i], "event " + std::to_string(i) + " misplaced");
        o.require(e.removed.size() == k && e.count_after == e.count_before - k, "count formula");
        seen += (seen.empty() ? "" : " ") + std::to_string(e.iteration) + "@" + fmt("%.1f", e.rate) + ":" +
                std::to_string(e.count_before) + "->" + std::to_string(e.count_after);
    }
    o.note(seen + ", " + fmt("%.1f s", seconds_since(t0)));
    return o;
}

// ---------------------------------------------------------------------------

struct RegionPsnr {
    double global = 0.0, critical = 0.0, noncritical = 0.0;
    std::size_t gaussians = 0;
};

RegionPsnr evaluate_regions(const SceneModel& scene, const SynthScene& s) {
    std::vector<double> rendered, gt;
    std::vector<std::uint8_t> crit;
    for (std::size_t v = 0; v < s.views.size(); ++v) {
        const FrameRender fr = render_frame(scene, s.views[v]);
        rendered.insert(rendered.end(), fr.forward.target.color.begin(), fr.forward.target.color.end());
        gt.insert(gt.end(), s.views[v].gt_image->begin(), s.views[v].gt_image->end());
        for (std::int32_t l : s.masks[v].labels) crit.push_back(criticality(l, s.classes) ? 1 : 0);
    }
    const int w = s.views.front().width();
    const MetricsReport m = compare_images(rendered, gt, w, static_cast<int>(crit.size() / w), crit);
    return {m.psnr_global, m.psnr_critical.value_or(0.0), m.psnr_noncritical.value_or(0.0), scene.gaussian_count()};
}

Outcome semantic_ablation() {
    Outcome o;
    const auto t0 = Clock::now();
    const SynthScene s = synth_scene({});
    SceneModel init = perturbed_init(s.scene, 11);
    apply_semantic_scores(init, compute_semantic_scores(init, s.views, s.masks, s.classes));
    RegionPsnr res[3];
    const double alphas[] = {0.4, 0.0, 1.0};
    for (int k = 0; k < 3; ++k) {
        TrainConfig c;
        c.alpha = alphas[k];
        c.t_total = 20000;
        c.raster.workers = 1;
        res[k] = evaluate_regions(train(init, s.views, c).scene, s);
    }
    const double secs = seconds_since(t0);
    o.require(res[0].critical > res[1].critical, "PSNR-C(hybrid) <= PSNR-C(gradient-only)");
    o.require(res[0].global > res[2].global, "PSNR-G(hybrid) <= PSNR-G(semantic-only)");
    o.require(secs < 900.0, "runtime");
    const char* names[] = {"hybrid", "grad-only", "sem-only"};
    for (int k = 0; k < 3; ++k)
        o.note(std::string(names[k]) + " C/NC/G " + fmt("%.2f", res[k].critical) + "/" +
               fmt("%.2f", res[k].noncritical) + "/" + fmt("%.2f", res[k].global) + " dB, " +
               std::to_string(res[k].gaussians) + " Gaussians");
    o.note(fmt("%.0f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

Outcome priority_win() {
    Outcome o;
    const auto t0 = Clock::now();
    SynthOptions opt;
    opt.layout = "wall";
    opt.render_gt = false;
    const SynthScene s = synth_scene(opt);
    const CameraView& cam = s.views[0];
    o.require(cam.width() == 512 && cam.height() == 512, "wall view is not 512x512");

    PriorityConfig pc;
    std::vector<double> single_ms, prio_ms;
    PriorityRender single, prio;
    for (int rep = 0; rep < 3; ++rep) {
        single = render_single_pass(s.scene, cam, pc);
        prio = render_priority(s.scene, cam, pc);
        single_ms.push_back(single.stats.colorpass_ms);
        prio_ms.push_back(prio.stats.colorpass_ms);
    }
    std::sort(single_ms.begin(), single_ms.end());
    std::sort(prio_ms.begin(), prio_ms.end());
    const double ratio = prio_ms[1] / single_ms[1];

    SceneModel behind = s.scene;
    std::erase_if(behind.static_gaussians, [&](const GaussianPrimitive& g) {
        return criticality(s.labels.at(g.id), s.classes);
    });
    const std::uint64_t behind_binned = render_single_pass(behind, cam, pc).stats.fragments_binned;
    const double culled = static_cast<double>(prio.stats.fragments_culled_earlyz) / behind_binned;
    const double quality = psnr(prio.target.color, single.target.color);

    PriorityConfig none = pc;
    none.opacity_threshold = 1.01;
    const PriorityRender empty = render_priority(s.scene, cam, none);
    const FrameRender reference = render_frame(s.scene, cam);
    const bool identical = empty.stats.occluders == 0 && empty.target.color == single.target.color &&
                           empty.target.color == reference.forward.target.color;

    const double secs = seconds_since(t0);
    o.require(ratio <= 0.7, "color-pass time ratio " + fmt("%.2f", ratio));
    o.require(culled >= 0.5 && culled <= 1.0, "culled " + fmt("%.3f", culled) + " of behind-wall fragments");
    o.require(quality >= 40.0, "PSNR vs single pass " + fmt("%.1f", quality));
    o.require(identical, "empty occluder set changes the image");
    o.require(secs < 120.0, "runtime");
    o.note("time ratio " + fmt("%.2f", ratio) + " (" + fmt("%.0f", prio_ms[1]) + "/" + fmt("%.0f", single_ms[1]) +
           " ms), culled " + std::to_string(prio.stats.fragments_culled_earlyz) + "/" +
           std::to_string(behind_binned) + " behind-wall fragments, PSNR " + fmt("%.1f", quality) +
           " dB, empty set bit-identical, " + fmt("%.0f s", secs));
    return o;
}

// ---------------------------------------------------------------------------

Outcome convergence() {
    Outcome o;
    const auto t0 = Clock::now();
    const Toy t = toy(50, 32, 4, 3);
    TrainConfig cfg;
    cfg.t_total = 2000;
    cfg.seed = 5;
    cfg.raster.workers = 1;
    cfg.prune_rate = 0.6;
    cfg.densify_milestones = {1000};
    cfg.finetune_start = 100000;
    const EvalResult before = evaluate_views(t.init, t.truth.views, cfg);
    std::ostringstream log_a, log_b;
    const TrainResult a = train(t.init, t.truth.views, cfg, &log_a);
    const TrainResult b = train(t.init, t.truth.views, cfg, &log_b);
    const EvalResult after = evaluate_views(a.scene, t.truth.views, cfg);
    o.require(a.log.size() == 200, "iteration count");
    o.require(after.loss < before.loss, "loss did not decrease");
    o.require(after.psnr > before.psnr, "PSNR did not increase");
    o.require(encode_ply(a.scene) == encode_ply(b.scene) && log_a.str() == log_b.str(), "runs differ");
    o.note("loss " + fmt("%.4f", before.loss) + " -> " + fmt("%.4f", after.loss) + ", PSNR " +
           fmt("%.2f", before.psnr) + " -> " + fmt("%.2f", after.psnr) + " dB, seeded runs bit-identical, " +
           fmt("%.1f s", seconds_since(t0)));
    return o;
}

// ---------------------------------------------------------------------------

std::string baseline_ply(std::size_t n) {
    std::ostringstream h;
    h << "ply\nformat binary_little_endian 1.0\nelement vertex " << n << "\n";
    const char* props[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                           "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
    for (const char* p : props) h << "property float " << p << "\n";
    h << "end_header\n";
    std::string out = h.str();
    for (std::size_t i = 0; i < n; ++i) {
        const float v[17] = {static_cast<float>(i), 0.5f, 2.0f, 0, 0, 0, 0.1f, 0.2f, 0.3f, 0.0f,
                             -2.0f, -2.0f, -2.0f, 1.0f, 0.0f, 0.0f, 0.0f};
        out.append(reinterpret_cast<const char*>(v), sizeof v);
    }
    return out;
}

Outcome formats() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(8);
    std::size_t scenes = 0;
    for (int k = 0; k < 5; ++k) {
        const SceneModel s = grad_scene(rng, 20 + 20 * k, k % 2 ? 5 : 0, k % 3);
        const std::string bytes = encode_ply(s);
        const SceneModel back = decode_ply(bytes);
        o.require(encode_ply(back) == bytes, "PLY round trip changed bytes");
        const auto wa = compose_world(s, 0.3), wb = compose_world(back, 0.3);
        bool same = wa.size() == wb.size();
        for (std::size_t i = 0; same && i < wa.size(); ++i)
            same = wa[i].id == wb[i].id && wa[i].mean == wb[i].mean && wa[i].log_scale == wb[i].log_scale &&
                   wa[i].rotation == wb[i].rotation && wa[i].opacity_logit == wb[i].opacity_logit &&
                   wa[i].sh == wb[i].sh && wa[i].s_sem == wb[i].s_sem && wa[i].critical == wb[i].critical;
        o.require(same, "PLY round trip changed fields");
        ++scenes;
    }
    const auto prev = set_warning_sink([](std::string_view) {});
    const SceneModel base = decode_ply(baseline_ply(10));
    set_warning_sink(prev);
    bool defaults = base.static_gaussians.size() == 10;
    for (const auto& g : base.static_gaussians) defaults = defaults && g.s_sem == 0.0 && !g.critical;
    o.require(defaults, "baseline PLY defaults");

    std::size_t fixtures = 0;
    for (const char* layout : {"street-toy", "random"}) {
        SynthOptions opt;
        opt.layout = layout;
        const SynthScene s = synth_scene(opt);
        SceneModel rough = perturbed_init(s.scene, 1);
        for (std::size_t v = 0; v < s.views.size(); ++v) {
            const CameraView& cam = s.views[v];
            const auto img = render_frame(rough, cam).forward.target.color;
            std::vector<std::uint8_t> crit(s.masks[v].labels.size());
            for (std::size_t p = 0; p < crit.size(); ++p) crit[p] = criticality(s.masks[v].labels[p], s.classes);
            const MetricsReport m = compare_images(img, *cam.gt_image, cam.width(), cam.height(), crit);
            o.require(m.pixels_critical + m.pixels_noncritical == m.pixels_global, "pixel counts");
            auto mse = [](std::optional<double> p) { return p ? std::pow(10.0, -*p / 10.0) : 0.0; };
            const double recombined = (mse(m.psnr_critical) * m.pixels_critical +
                                       mse(m.psnr_noncritical) * m.pixels_noncritical) / m.pixels_global;
            o.require(std::abs(recombined - mse(m.psnr_global)) <= 1e-9 * mse(m.psnr_global) + 1e-15, "MSE split");
            o.require(compare_images(img, img, cam.width(), cam.height()).psnr_global == kPsnrCap, "identity PSNR");
            o.require(std::abs(*compare_images(img, img, cam.width(), cam.height()).ssim - 1.0) < 1e-12,
                      "identity SSIM");
            ++fixtures;
        }
    }
    o.note(std::to_string(scenes) + " PLY round trips, baseline defaults, metric identities on " +
           std::to_string(fixtures) + " views, " + fmt("%.1f s", seconds_since(t0)));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::function<Outcome()> criteria[] = {equations,         oracle,         gradients,
                                                 dropout_statistics, pruning_schedule, semantic_ablation,
                                                 priority_win,      convergence,    formats};
    const char* names[] = {"equation suite", "oracle equivalence", "gradient checks",
                           "dropout statistics", "pruning schedule", "semantic-protection ablation",
                           "priority-pipeline win", "convergence sanity", "format suite"};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (int k = 0; k < 9; ++k) {
        if (!only.empty() && !only.count(k + 1)) continue;
        Outcome r;
        try {
            r = criteria[k]();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        failed += !r.pass;
        std::cout << "criterion " << k + 1 << ": " << (r.pass ? "PASS" : "FAIL") << "  " << names[k] << "  ("
                  << r.detail << ")" << std::endl;
    }
    return failed ? 1 : 0;
}
