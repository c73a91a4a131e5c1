#include "pags/optimizer.hpp"

#include "pags/metrics.hpp"
#include "pags/ply.hpp"
#include "pags/quaternion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace pags {

int TrainConfig::scaled(int iteration) const {
    return static_cast<int>(std::lround(iteration * schedule_scale));
}

void TrainConfig::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    auto rate = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!unit(alpha)) throw ConfigError("alpha must lie in [0, 1]");
    if (!unit(beta)) throw ConfigError("beta must lie in [0, 1]");
    if (!rate(gamma)) throw ConfigError("gamma must lie in [0, 1)");
    if (!rate(prune_rate) || !rate(finetune_rate)) throw ConfigError("prune rates must lie in [0, 1)");
    if (!(schedule_scale > 0.0)) throw ConfigError("schedule_scale must be positive");
    if (scaled_total() < 0) throw ConfigError("t_total must be non-negative");
    if (scaled(finetune_interval) <= 0) throw ConfigError("scaled finetune interval must be at least 1");
    if (!(densify_grad_threshold >= 0.0)) throw ConfigError("densify_grad_threshold must be non-negative");
    if (!(ssim_weight >= 0.0 && ssim_weight <= 1.0)) throw ConfigError("ssim_weight must lie in [0, 1]");
}

double hybrid_score(double s_sem, double s_grad, double alpha) { return alpha * s_sem + (1.0 - alpha) * s_grad; }

double dropout_probability(double s_sem, double t, double t_total, double beta, double gamma) {
    if (!(t_total > 0.0)) return 0.0;
    return (1.0 - beta * s_sem) * gamma * (t / t_total);
}

double compensation_factor(double d) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("dropout probability " + std::to_string(d) + " outside [0, 1)");
    return 1.0 / (1.0 - d);
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
void for_each_primitive(const SceneModel& scene, Fn&& fn) {
    for (const auto& g : scene.static_gaussians) fn(g);
    for (const auto& obj : scene.dynamic_objects)
        for (const auto& dg : obj.gaussians) fn(dg.primitive);
}

std::set<GaussianId> scene_ids(const SceneModel& scene) {
    std::set<GaussianId> ids;
    for_each_primitive(scene, [&](const GaussianPrimitive& g) { ids.insert(g.id); });
    return ids;
}

}  // namespace

ImportanceState ImportanceState::from_scene(const SceneModel& scene, double alpha) {
    ImportanceState s;
    s.alpha = alpha;
    s.sync(scene);
    return s;
}

void ImportanceState::sync(const SceneModel& scene) {
    std::map<GaussianId, ImportanceEntry> next;
    for_each_primitive(scene, [&](const GaussianPrimitive& g) {
        auto it = entries.find(g.id);
        ImportanceEntry e = it != entries.end() ? it->second : ImportanceEntry{};
        e.s_sem = g.s_sem;
        e.s_hybrid = hybrid_score(e.s_sem, e.s_grad, alpha);
        next[g.id] = e;
    });
    entries = std::move(next);
}

void ImportanceState::refresh_hybrid() {
    for (auto& [id, e] : entries) e.s_hybrid = hybrid_score(e.s_sem, e.s_grad, alpha);
}

void normalize_grad_scores(ImportanceState& state) {
    double mx = 0.0;
    for (const auto& [id, e] : state.entries) mx = std::max(mx, e.raw_grad);
    for (auto& [id, e] : state.entries) {
        e.s_grad = mx > 0.0 ? e.raw_grad / mx : 0.0;
        e.raw_grad = 0.0;
    }
    state.refresh_hybrid();
}

PruneEvent prune_step(SceneModel& scene, ImportanceState& state, double rate, int iteration) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("prune rate must lie in [0, 1)");
    PruneEvent ev;
    ev.iteration = iteration;
    ev.rate = rate;
    ev.alpha = state.alpha;
    ev.count_before = scene.gaussian_count();
    // the small offset keeps products like 0.6 * 10 from rounding up to 7
    const auto k = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(ev.count_before) - 1e-9));

    std::vector<std::pair<double, GaussianId>> ranked;
    for_each_primitive(scene, [&](const GaussianPrimitive& g) {
        const auto it = state.entries.find(g.id);
        const double h = it != state.entries.end() ? it->second.s_hybrid : hybrid_score(g.s_sem, 0.0, state.alpha);
        ranked.emplace_back(h, g.id);
    });
    std::sort(ranked.begin(), ranked.end());
    std::set<GaussianId> doomed;
    for (std::size_t i = 0; i < k && i < ranked.size(); ++i) {
        doomed.insert(ranked[i].second);
        ev.removed.push_back(ranked[i].second);
    }

    auto& sg = scene.static_gaussians;
    sg.erase(std::remove_if(sg.begin(), sg.end(), [&](const GaussianPrimitive& g) { return doomed.count(g.id); }),
             sg.end());
    for (auto& obj : scene.dynamic_objects) {
        auto& dg = obj.gaussians;
        dg.erase(std::remove_if(dg.begin(), dg.end(),
                                [&](const DynamicGaussian& g) { return doomed.count(g.primitive.id); }),
                 dg.end());
    }
    for (GaussianId id : doomed) state.entries.erase(id);
    ev.count_after = scene.gaussian_count();
    return ev;
}

DropoutSample apply_dropout(const SceneModel& scene, ImportanceState& state, const TrainConfig& config, double t,
                            double t_total, std::mt19937_64& rng) {
    DropoutSample out;
    const std::size_t n = scene.gaussian_count();
    out.keep.assign(n, 1);
    out.compensation.assign(n, 1.0);
    std::size_t i = 0;
    for_each_primitive(scene, [&](const GaussianPrimitive& g) {
        const double d = dropout_probability(g.s_sem, t, t_total, config.beta, config.gamma);
        const double c = compensation_factor(d);
        if (d > 0.0 && uniform01(rng) < d) {
            out.keep[i] = 0;
            ++out.dropped;
            ++state.entries[g.id].drops;
        } else {
            out.compensation[i] = c;
        }
        ++i;
    });
    return out;
}

// ---------------------------------------------------------------------------

DensifyEvent densify_step(SceneModel& scene, const std::map<GaussianId, DensifyStats>& stats,
                          const DensifyConfig& config, std::mt19937_64& rng, int iteration) {
    DensifyEvent ev;
    ev.iteration = iteration;
    ev.count_before = scene.gaussian_count();
    GaussianId next = scene.next_id();
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shrink = std::log(1.6);

    auto selected = [&](const GaussianPrimitive& g) {
        const auto it = stats.find(g.id);
        if (it == stats.end() || it->second.count == 0) return false;
        return it->second.grad_sum / static_cast<double>(it->second.count) > config.grad_threshold;
    };
    auto sample_offset = [&](const GaussianPrimitive& g) {
        const Vec3 s = g.log_scale.array().exp();
        const Vec3 z(normal(rng) * s.x(), normal(rng) * s.y(), normal(rng) * s.z());
        return Vec3(quat::to_matrix(g.rotation) * z);
    };
    // returns the child; modifies the parent in place when splitting
    auto densify_one = [&](GaussianPrimitive& parent) {
        GaussianPrimitive child = parent;
        child.id = next++;
        if (parent.log_scale.maxCoeff() <= std::log(config.size_threshold)) {
            child.mean = parent.mean + 0.1 * sample_offset(parent);
            ++ev.cloned;
        } else {
            const Vec3 a = sample_offset(parent), b = sample_offset(parent);
            child.mean = parent.mean + b;
            child.log_scale = parent.log_scale.array() - shrink;
            parent.mean += a;
            parent.log_scale = parent.log_scale.array() - shrink;
            ++ev.split;
        }
        return child;
    };

    const std::size_t n_static = scene.static_gaussians.size();
    for (std::size_t i = 0; i < n_static; ++i) {
        if (!selected(scene.static_gaussians[i])) continue;
        GaussianPrimitive child = densify_one(scene.static_gaussians[i]);
        scene.static_gaussians.push_back(std::move(child));
    }
    for (auto& obj : scene.dynamic_objects) {
        const std::size_t m = obj.gaussians.size();
        for (std::size_t i = 0; i < m; ++i) {
            if (!selected(obj.gaussians[i].primitive)) continue;
            DynamicGaussian child = obj.gaussians[i];
            child.primitive = densify_one(obj.gaussians[i].primitive);
            obj.gaussians.push_back(std::move(child));
        }
    }
    ev.count_after = scene.gaussian_count();
    return ev;
}

// ---------------------------------------------------------------------------

double AdamOptimizer::position_lr(int iteration) const {
    const int total = std::max(1, config_.scaled_total());
    const double t = std::clamp(static_cast<double>(iteration) / total, 0.0, 1.0);
    return std::exp((1.0 - t) * std::log(config_.lr.position) + t * std::log(config_.lr.position_final));
}

void AdamOptimizer::update(Moments& mom, std::size_t k, double& value, double grad, double lr) {
    if (mom.m.size() <= k) {
        mom.m.resize(k + 1, 0.0);
        mom.v.resize(k + 1, 0.0);
    }
    const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
    mom.m[k] = b1 * mom.m[k] + (1.0 - b1) * grad;
    mom.v[k] = b2 * mom.v[k] + (1.0 - b2) * grad * grad;
    const double mhat = mom.m[k] / (1.0 - std::pow(b1, static_cast<double>(steps_)));
    const double vhat = mom.v[k] / (1.0 - std::pow(b2, static_cast<double>(steps_)));
    value -= lr * mhat / (std::sqrt(vhat) + config_.adam_eps);
}

void AdamOptimizer::step(SceneModel& scene, const BackwardBuffers& grads, int iteration) {
    ++steps_;
    const double lr_pos = position_lr(iteration);
    auto rate = [&](ParamClass c) {
        switch (c) {
            case ParamClass::Position: return lr_pos;
            case ParamClass::Scale: return config_.lr.scale;
            case ParamClass::Rotation: return config_.lr.rotation;
            case ParamClass::Opacity: return config_.lr.opacity;
            case ParamClass::Appearance: return config_.lr.sh;
            case ParamClass::PoseRotation:
            case ParamClass::PoseTranslation: return config_.lr.pose;
        }
        return 0.0;
    };
    auto step_gaussian = [&](GaussianPrimitive& g, TimeVaryingSH* app, const GaussianGrad& gr) {
        Moments& mom = gaussian_moments_[g.id];
        std::size_t k = 0;
        for_each_gaussian_parameter(g, app, gr, [&](double& v, double grad, ParamClass c) {
            update(mom, k++, v, grad, rate(c));
        });
        g.rotation = quat::normalized(g.rotation);
    };
    for (std::size_t i = 0; i < scene.static_gaussians.size(); ++i) {
        step_gaussian(scene.static_gaussians[i], nullptr, grads.static_grads[i]);
    }
    for (std::size_t o = 0; o < scene.dynamic_objects.size(); ++o) {
        auto& obj = scene.dynamic_objects[o];
        for (std::size_t i = 0; i < obj.gaussians.size(); ++i) {
            step_gaussian(obj.gaussians[i].primitive, &obj.gaussians[i].appearance, grads.dynamic_grads[o][i]);
        }
        for (std::size_t p = 0; p < obj.poses.size(); ++p) {
            Moments& mom = pose_moments_[{obj.object_id, p}];
            std::size_t k = 0;
            for_each_pose_parameter(obj.poses[p], grads.pose_grads[o][p], [&](double& v, double grad, ParamClass c) {
                update(mom, k++, v, grad, rate(c));
            });
            obj.poses[p].rotation = quat::normalized(obj.poses[p].rotation);
        }
    }
}

void AdamOptimizer::sync(const SceneModel& scene) {
    const auto ids = scene_ids(scene);
    std::erase_if(gaussian_moments_, [&](const auto& kv) { return !ids.count(kv.first); });
}

// ---------------------------------------------------------------------------

namespace {

double camera_extent(std::span<const CameraView> views) {
    Vec3 center = Vec3::Zero();
    for (const auto& v : views) center += v.camera_center();
    center /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto& v : views) r = std::max(r, (v.camera_center() - center).norm());
    r *= 1.1;
    return r > 1e-6 ? r : 1.0;
}

std::size_t pixel_count3(const CameraView& v) { return static_cast<std::size_t>(v.width()) * v.height() * 3; }

void check_views(std::span<const CameraView> views) {
    if (views.empty()) throw ConfigError("training needs at least one view");
    for (const auto& v : views) {
        if (!v.gt_image) throw ConfigError("view " + std::to_string(v.view_id) + " has no ground-truth image");
        if (v.gt_image->size() != pixel_count3(v)) {
            throw DimensionError("ground-truth image of view " + std::to_string(v.view_id) + " has the wrong size");
        }
    }
}

}  // namespace

EvalResult evaluate_views(const SceneModel& scene, std::span<const CameraView> views, const TrainConfig& config) {
    check_views(views);
    EvalResult r;
    FrameOptions opt;
    opt.lookup = config.lookup;
    opt.raster = config.raster;
    for (const auto& v : views) {
        const FrameRender fr = render_frame(scene, v, opt);
        const auto& img = fr.forward.target.color;
        r.loss += photometric_loss(img, *v.gt_image, v.width(), v.height(), config.ssim_weight).value;
        r.psnr += psnr(img, *v.gt_image);
    }
    r.loss /= static_cast<double>(views.size());
    r.psnr /= static_cast<double>(views.size());
    return r;
}

TrainResult train(SceneModel scene, std::span<const CameraView> views, const TrainConfig& config,
                  std::ostream* log_stream) {
    config.validate();
    check_views(views);
    scene.validate();

    TrainResult result;
    std::mt19937_64 rng(config.seed);
    ImportanceState state = ImportanceState::from_scene(scene, config.alpha);
    AdamOptimizer adam(config);
    std::map<GaussianId, DensifyStats> dstats;
    const DensifyConfig dcfg{config.densify_grad_threshold, config.percent_dense * camera_extent(views)};

    const int total = config.scaled_total();
    std::set<int> densify_at;
    for (int m : config.densify_milestones) densify_at.insert(config.scaled(m));
    const int fine_start = config.scaled(config.finetune_start);
    const int fine_step = config.scaled(config.finetune_interval);

    if (log_stream) write_log_header(*log_stream);

    for (int it = 1; it <= total; ++it) {
        const std::size_t vi = std::uniform_int_distribution<std::size_t>(0, views.size() - 1)(rng);
        const CameraView& cam = views[vi];

        const DropoutSample drop = apply_dropout(scene, state, config, it, total, rng);
        FrameOptions opt;
        opt.lookup = config.lookup;
        opt.raster = config.raster;
        opt.keep = drop.keep;
        opt.opacity_scale = drop.compensation;

        const FrameRender fr = render_frame(scene, cam, opt);
        const auto& img = fr.forward.target.color;
        const PhotometricLoss loss = photometric_loss(img, *cam.gt_image, cam.width(), cam.height(),
                                                      config.ssim_weight);
        if (!std::isfinite(loss.value)) {
            if (!config.snapshot_path.empty()) save_ply(scene, config.snapshot_path);
            throw NumericalError("non-finite loss at iteration " + std::to_string(it) + " (view " +
                                 std::to_string(cam.view_id) + ", " + std::to_string(scene.gaussian_count()) +
                                 " Gaussians" +
                                 (config.snapshot_path.empty() ? "" : ", snapshot " + config.snapshot_path) + ")");
        }
        const BackwardBuffers grads = backward_frame(scene, cam, fr, loss.grad, opt);

        for (std::size_t w = 0; w < fr.world.size(); ++w) {
            const GaussianId id = fr.world[w].id;
            state.entries[id].raw_grad += grads.sgrad[w];
            if (grads.visible[w]) {
                auto& d = dstats[id];
                d.grad_sum += grads.mean2d_grad_norm[w] * 0.5 * cam.width();
                ++d.count;
            }
        }
        adam.step(scene, grads, it);

        IterationRecord rec{it, loss.value, psnr(img, *cam.gt_image), scene.gaussian_count(), drop.dropped};
        result.log.push_back(rec);
        if (log_stream) write_log_record(*log_stream, rec);

        auto prune = [&](double rate) {
            normalize_grad_scores(state);
            PruneEvent ev = prune_step(scene, state, rate, it);
            adam.sync(scene);
            for (GaussianId id : ev.removed) dstats.erase(id);
            if (log_stream) write_prune_event(*log_stream, ev);
            result.prune_events.push_back(std::move(ev));
        };
        if (densify_at.count(it)) {
            prune(config.prune_rate);
            if (config.densify && it < total) {
                DensifyEvent ev = densify_step(scene, dstats, dcfg, rng, it);
                dstats.clear();
                state.sync(scene);
                adam.sync(scene);
                if (log_stream) write_densify_event(*log_stream, ev);
                result.densify_events.push_back(ev);
            }
        } else if (it >= fine_start && (it - fine_start) % fine_step == 0) {
            prune(config.finetune_rate);
        }
    }
    result.scene = std::move(scene);
    return result;
}

// ---------------------------------------------------------------------------

void write_log_header(std::ostream& os) { os << "# pags-train-log v1\n"; }

void write_log_record(std::ostream& os, const IterationRecord& r) {
    os << "iter=" << r.iteration << " loss=" << r.loss << " psnr=" << r.psnr << " gaussian_count=" << r.gaussian_count
       << " dropped_count=" << r.dropped_count << '\n';
}

void write_prune_event(std::ostream& os, const PruneEvent& e) {
    os << "event=prune iter=" << e.iteration << " rate=" << e.rate << " alpha=" << e.alpha
       << " count_before=" << e.count_before << " count_after=" << e.count_after << " removed=" << e.removed.size()
       << '\n';
}

void write_densify_event(std::ostream& os, const DensifyEvent& e) {
    os << "event=densify iter=" << e.iteration << " cloned=" << e.cloned << " split=" << e.split
       << " count_before=" << e.count_before << " count_after=" << e.count_after << '\n';
}

}  // namespace pags
