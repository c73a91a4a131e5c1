#include "pags/config.hpp"
#include "pags/dataset.hpp"
#include "pags/image.hpp"
#include "pags/metrics.hpp"
#include "pags/optimizer.hpp"
#include "pags/ply.hpp"
#include "pags/priority.hpp"
#include "pags/semantic.hpp"
#include "pags/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pags;

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::vector<std::string> toggles;
    std::string scene_dir;
    std::string views;
    std::string ply_in;
    std::string out;
    std::string classes;
    std::string log;
};

/// Config file, then --set, then --toggle, then path flags.
RunConfig resolve(const Common& c) {
    RunConfig rc;
    if (!c.config_file.empty()) rc.apply(load_key_values(c.config_file));
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& t : c.toggles) rc.set_toggle(t);
    if (!c.scene_dir.empty()) {
        const fs::path d(c.scene_dir);
        if (rc.views.empty()) rc.views = (d / "views.txt").string();
        if (rc.classes.empty() && fs::exists(d / "classes.txt")) rc.classes = (d / "classes.txt").string();
    }
    if (!c.views.empty()) rc.views = c.views;
    if (!c.ply_in.empty()) rc.ply_in = c.ply_in;
    if (!c.out.empty()) rc.ply_out = rc.out_dir = c.out;
    if (!c.classes.empty()) rc.classes = c.classes;
    if (!c.log.empty()) rc.log = c.log;
    return rc;
}

std::string default_ply(const Common& c, const RunConfig& rc, const char* name) {
    if (!rc.ply_in.empty()) return rc.ply_in;
    if (c.scene_dir.empty()) throw ConfigError("no input PLY (use --in or --scene)");
    return (fs::path(c.scene_dir) / name).string();
}

const std::string& require(const std::string& v, const char* what) {
    if (v.empty()) throw ConfigError(std::string("missing ") + what);
    return v;
}

SemanticClassTable class_table(const RunConfig& rc) {
    return rc.classes.empty() ? SemanticClassTable::defaults() : SemanticClassTable::load(rc.classes);
}

std::vector<std::uint8_t> critical_pixels(const std::vector<std::int32_t>& labels, const SemanticClassTable& t) {
    std::vector<std::uint8_t> m(labels.size());
    for (std::size_t p = 0; p < labels.size(); ++p) m[p] = criticality(labels[p], t) ? 1 : 0;
    return m;
}

void write_class_table(const std::string& path, const SemanticClassTable& t) {
    std::ofstream os(path);
    os << "# label_id = name, critical\n";
    for (const auto& [id, c] : t.classes) os << id << " = " << c.name << ", " << (c.critical ? 1 : 0) << '\n';
    if (!os) throw ConfigError("cannot write " + path);
}

void write_scores(SceneModel& scene, const Dataset& ds, const RunConfig& rc) {
    if (ds.masks.empty()) throw ConfigError("every view needs a semantic mask for scoring");
    const auto scores = compute_semantic_scores(scene, ds.views, ds.masks, class_table(rc), rc.train.lookup);
    apply_semantic_scores(scene, scores);
}

int run_synth(const SynthOptions& opt, const std::string& out, std::uint64_t init_seed) {
    require(out, "--out");
    const SynthScene s = synth_scene(opt);
    const fs::path d(out);
    fs::create_directories(d);
    save_ply(s.scene, (d / "scene.ply").string());
    save_ply(perturbed_init(s.scene, init_seed), (d / "init.ply").string());
    save_dataset((d / "views.txt").string(), s.views, opt.render_gt ? "images" : "", opt.render_gt ? "masks" : "");
    write_class_table((d / "classes.txt").string(), s.classes);
    std::ofstream labels(d / "labels.txt");
    labels << "# gaussian_id label\n";
    for (const auto& [id, l] : s.labels) labels << id << ' ' << l << '\n';
    std::cout << "layout=" << opt.layout << " seed=" << opt.seed << " gaussians=" << s.scene.gaussian_count()
              << " views=" << s.views.size() << " out=" << d.string() << '\n';
    return 0;
}

int run_score(const Common& c) {
    const RunConfig rc = resolve(c);
    SceneModel scene = load_ply(default_ply(c, rc, "init.ply"));
    const Dataset ds = load_dataset(require(rc.views, "--views or --scene"), false);
    write_scores(scene, ds, rc);
    save_ply(scene, require(rc.ply_out, "--out"));
    std::size_t critical = 0;
    double sum = 0.0;
    for (const auto& g : compose_world(scene, 0.0)) {
        critical += g.critical;
        sum += g.s_sem;
    }
    std::cout << "gaussians=" << scene.gaussian_count() << " critical=" << critical
              << " mean_s_sem=" << (scene.gaussian_count() ? sum / scene.gaussian_count() : 0.0) << '\n';
    return 0;
}

int run_train(const Common& c, bool score_first) {
    const RunConfig rc = resolve(c);
    SceneModel scene = load_ply(default_ply(c, rc, "init.ply"));
    const Dataset ds = load_dataset(require(rc.views, "--views or --scene"));
    if (score_first) write_scores(scene, ds, rc);
    TrainConfig tc = rc.effective_train();
    const std::string out = require(rc.ply_out, "--out");
    if (tc.snapshot_path.empty()) tc.snapshot_path = out + ".nan.ply";

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!rc.log.empty()) {
        log_file.open(rc.log);
        if (!log_file) throw ConfigError("cannot write " + rc.log);
        log = &log_file;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(scene, ds.views, tc, log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_ply(res.scene, out);

    MetricsReport total;
    std::size_t crit_px = 0, rest_px = 0;
    double se_all = 0.0, se_crit = 0.0, se_rest = 0.0;
    FrameOptions fo;
    fo.lookup = tc.lookup;
    fo.raster = tc.raster;
    for (std::size_t i = 0; i < ds.views.size(); ++i) {
        const CameraView& v = ds.views[i];
        if (!v.gt_image) continue;
        const auto fr = render_frame(res.scene, v, fo);
        const auto& img = fr.forward.target.color;
        const auto mask = ds.masks.empty() ? std::vector<std::uint8_t>{}
                                           : critical_pixels(ds.masks[i].labels, class_table(rc));
        for (std::size_t p = 0; p < img.size() / 3; ++p) {
            double se = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = img[3 * p + k] - (*v.gt_image)[3 * p + k];
                se += d * d;
            }
            se_all += se;
            if (!mask.empty() && mask[p]) {
                se_crit += se;
                ++crit_px;
            } else {
                se_rest += se;
                ++rest_px;
            }
        }
    }
    auto to_psnr = [](double se, std::size_t px) -> std::optional<double> {
        if (px == 0) return std::nullopt;
        const double mse = se / (3.0 * px);
        return mse <= 0.0 ? kPsnrCap : std::min(kPsnrCap, -10.0 * std::log10(mse));
    };
    total.pixels_critical = crit_px;
    total.pixels_noncritical = rest_px;
    total.pixels_global = crit_px + rest_px;
    total.psnr_global = to_psnr(se_all, total.pixels_global).value_or(0.0);
    total.psnr_critical = to_psnr(se_crit, crit_px);
    total.psnr_noncritical = to_psnr(se_rest, rest_px);
    total.gaussian_count = res.scene.gaussian_count();
    total.train_time_s = secs;
    write_metrics_report(std::cout, total);
    return 0;
}

int run_render(const Common& c, bool pdr) {
    const RunConfig rc = resolve(c);
    const SceneModel scene = load_ply(default_ply(c, rc, "scene.ply"));
    const Dataset ds = load_dataset(require(rc.views, "--views or --scene"));
    const std::string out = require(rc.out_dir, "--out");
    fs::create_directories(out);
    PriorityConfig pc = rc.priority;
    for (std::size_t i = 0; i < ds.views.size(); ++i) {
        const CameraView& v = ds.views[i];
        const PriorityRender r = pdr ? render_priority(scene, v, pc) : render_single_pass(scene, v, pc);
        write_png((fs::path(out) / ("view_" + std::to_string(v.view_id) + ".png")).string(), v.width(),
                  v.height(), r.target.color);
        std::cout << "view=" << v.view_id << " mode=" << (pdr ? "priority" : "single") << ' ';
        write_render_stats(std::cout, r.stats);
        if (v.gt_image) {
            const auto mask = ds.masks.empty() ? std::vector<std::uint8_t>{}
                                               : critical_pixels(ds.masks[i].labels, class_table(rc));
            MetricsReport m = compare_images(r.target.color, *v.gt_image, v.width(), v.height(), mask);
            m.gaussian_count = scene.gaussian_count();
            std::cout << "view=" << v.view_id << ' ';
            write_metrics_report(std::cout, m);
        }
    }
    return 0;
}

int run_prune(const Common& c, double rate) {
    const RunConfig rc = resolve(c);
    SceneModel scene = load_ply(default_ply(c, rc, "scene.ply"));
    const TrainConfig tc = rc.effective_train();
    ImportanceState state = ImportanceState::from_scene(scene, tc.alpha);
    if (!rc.views.empty()) {
        const Dataset ds = load_dataset(rc.views);
        FrameOptions fo;
        fo.lookup = tc.lookup;
        fo.raster = tc.raster;
        for (const CameraView& v : ds.views) {
            if (!v.gt_image) continue;
            const auto fr = render_frame(scene, v, fo);
            const auto loss = photometric_loss(fr.forward.target.color, *v.gt_image, v.width(), v.height(),
                                               tc.ssim_weight);
            const auto grads = backward_frame(scene, v, fr, loss.grad, fo);
            for (std::size_t w = 0; w < fr.world.size(); ++w)
                state.entries[fr.world[w].id].raw_grad += grads.sgrad[w];
        }
    }
    normalize_grad_scores(state);
    const PruneEvent ev = prune_step(scene, state, rate);
    save_ply(scene, require(rc.ply_out, "--out"));
    write_prune_event(std::cout, ev);
    return 0;
}

int run_bench(const Common& c, int view_index, int repeat) {
    const RunConfig rc = resolve(c);
    const SceneModel scene = load_ply(default_ply(c, rc, "scene.ply"));
    const Dataset ds = load_dataset(require(rc.views, "--views or --scene"), false);
    if (view_index < 0 || view_index >= static_cast<int>(ds.views.size()))
        throw ConfigError("--view out of range (" + std::to_string(ds.views.size()) + " views)");
    if (repeat < 1) throw ConfigError("--repeat must be at least 1");
    const CameraView& v = ds.views[view_index];
    const PriorityConfig& pc = rc.priority;

    PriorityRender single, prio;
    double single_ms = 0.0, prio_ms = 0.0, frame_ms = 0.0;
    for (int r = 0; r < repeat; ++r) {
        single = render_single_pass(scene, v, pc);
        prio = render_priority(scene, v, pc);
        single_ms += single.stats.colorpass_ms;
        prio_ms += prio.stats.colorpass_ms;
        frame_ms += prio.stats.prepass_ms + prio.stats.colorpass_ms;
    }
    std::cout << "mode=single ";
    write_render_stats(std::cout, single.stats);
    std::cout << "mode=priority ";
    write_render_stats(std::cout, prio.stats);
    const double culled = prio.stats.fragments_binned
                              ? static_cast<double>(prio.stats.fragments_culled_earlyz) / prio.stats.fragments_binned
                              : 0.0;
    std::cout << "psnr_vs_single=" << psnr(prio.target.color, single.target.color) << " culled_fraction=" << culled
              << " colorpass_time_ratio=" << (single_ms > 0.0 ? prio_ms / single_ms : 0.0)
              << " fps_equivalent=" << 1000.0 / (frame_ms / repeat) << " repeat=" << repeat << '\n';
    return 0;
}

MetricsReport metrics_pair(const std::string& a, const std::string& b, const std::string& mask,
                           const SemanticClassTable& table) {
    const RgbImage ia = read_png(a), ib = read_png(b);
    if (ia.width != ib.width || ia.height != ib.height) throw DimensionError(a + " and " + b + " differ in size");
    std::vector<std::uint8_t> crit;
    if (!mask.empty()) {
        const LabelImage li = read_label_png(mask);
        if (li.width != ia.width || li.height != ia.height) throw DimensionError("mask size differs from " + a);
        crit = critical_pixels(li.labels, table);
    }
    return compare_images(ia.data, ib.data, ia.width, ia.height, crit);
}

int run_metrics(const Common& c, const std::string& a, const std::string& b, const std::string& mask) {
    const RunConfig rc = resolve(c);
    const SemanticClassTable table = class_table(rc);
    if (!fs::is_directory(a)) {
        write_metrics_report(std::cout, metrics_pair(a, b, mask, table));
        return 0;
    }
    if (!fs::is_directory(b)) throw ConfigError(b + " is not a directory");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".png" && fs::exists(fs::path(b) / e.path().filename()))
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw ConfigError("no PNG names shared by " + a + " and " + b);
    double sum = 0.0;
    for (const auto& n : names) {
        const std::string m = mask.empty() ? "" : (fs::path(mask) / n).string();
        const MetricsReport r = metrics_pair((fs::path(a) / n).string(), (fs::path(b) / n).string(), m, table);
        sum += r.psnr_global;
        std::cout << "file=" << n << ' ';
        write_metrics_report(std::cout, r);
    }
    std::cout << "files=" << names.size() << " mean_psnr_global=" << sum / names.size() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splatting with semantic pruning and occlusion-culled rendering", "pags"};
    app.require_subcommand(1);
    Common c;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--set", c.sets, "override one config key (key=value)");
        sub->add_option("--toggle", c.toggles, "SP|SD|SPR|PDR=on|off");
    };
    auto scene_opts = [&](CLI::App* sub) {
        sub->add_option("--scene", c.scene_dir, "directory written by `synth`");
        sub->add_option("--views", c.views, "views file");
        sub->add_option("--in", c.ply_in, "input PLY");
        sub->add_option("--classes", c.classes, "class table");
    };

    SynthOptions so;
    std::uint64_t init_seed = 11;
    bool no_gt = false;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
    synth->add_option("--layout", so.layout, "wall | street-toy | random");
    synth->add_option("--seed", so.seed);
    synth->add_option("--count", so.count, "Gaussians (random layout)");
    synth->add_option("--size", so.size, "image size in pixels (0: layout default)");
    synth->add_option("--views", so.views, "number of views (0: layout default)");
    synth->add_option("--init-seed", init_seed, "seed of the perturbed init.ply");
    synth->add_flag("--no-gt", no_gt, "skip ground-truth images and masks");
    synth->add_option("--out", c.out, "output directory")->required();

    auto* score = app.add_subcommand("score", "semantic scores from masks");
    common(score);
    scene_opts(score);
    score->add_option("--out", c.out, "output PLY");

    bool score_first = false;
    auto* train = app.add_subcommand("train", "optimize a scene against its views");
    common(train);
    scene_opts(train);
    train->add_option("--out", c.out, "output PLY");
    train->add_option("--log", c.log, "event log (default stdout)");
    train->add_flag("--score", score_first, "compute semantic scores before training");

    bool pdr = false;
    auto* render = app.add_subcommand("render", "render every view to PNG");
    common(render);
    scene_opts(render);
    render->add_flag("--pdr", pdr, "priority pass with depth pre-pass");
    render->add_option("--out", c.out, "output directory");

    double rate = 0.6;
    auto* prune = app.add_subcommand("prune", "one-shot prune of a PLY");
    common(prune);
    scene_opts(prune);
    prune->add_option("--rate", rate, "fraction removed, in [0, 1)");
    prune->add_option("--out", c.out, "output PLY");

    int view_index = 0, repeat = 1;
    auto* bench = app.add_subcommand("bench", "culling benchmark: single pass vs priority pass");
    common(bench);
    scene_opts(bench);
    bench->add_option("--view", view_index, "view index");
    bench->add_option("--repeat", repeat, "renders per mode");

    std::string img_a, img_b, mask;
    auto* metrics = app.add_subcommand("metrics", "PSNR / SSIM between images or directories");
    common(metrics);
    metrics->add_option("a", img_a, "image or directory")->required();
    metrics->add_option("b", img_b, "image or directory")->required();
    metrics->add_option("--mask", mask, "label PNG (or directory) splitting critical pixels");
    metrics->add_option("--classes", c.classes, "class table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "pags: " << e.what() << "\n\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 2;
    }

    try {
        if (*synth) {
            so.render_gt = !no_gt;
            return run_synth(so, c.out, init_seed);
        }
        if (*score) return run_score(c);
        if (*train) return run_train(c, score_first);
        if (*render) return run_render(c, pdr);
        if (*prune) return run_prune(c, rate);
        if (*bench) return run_bench(c, view_index, repeat);
        if (*metrics) return run_metrics(c, img_a, img_b, mask);
    } catch (const std::exception& e) {
        std::cerr << "pags: error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
