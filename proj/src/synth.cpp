#include "pags/synth.hpp"

#include "pags/quaternion.hpp"
#include "pags/rasterizer.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pags {

namespace {

constexpr std::int32_t kRoad = 0, kBuilding = 2, kVegetation = 3, kVehicle = 5, kPedestrian = 6;

struct Builder {
    std::mt19937_64 rng;
    SynthScene out;
    GaussianId next = 0;

    explicit Builder(std::uint64_t seed) : rng(seed) {}

    double u(double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

    GaussianPrimitive make(const Vec3& mean, const Vec3& sigma, double opacity, const Vec3& rgb, std::int32_t label) {
        GaussianPrimitive g;
        g.id = next++;
        g.mean = mean;
        g.log_scale = sigma.array().log();
        g.opacity_logit = logit(opacity);
        g.sh = ShBlock(1, (rgb - Vec3::Constant(0.5)) / kShC0);
        g.critical = out.classes.classes.count(label) && out.classes.classes.at(label).critical;
        g.s_sem = g.critical ? 1.0 : 0.0;
        out.labels[g.id] = label;
        return g;
    }

    void add(const Vec3& mean, const Vec3& sigma, double opacity, const Vec3& rgb, std::int32_t label) {
        out.scene.static_gaussians.push_back(make(mean, sigma, opacity, rgb, label));
    }

    Vec3 jitter(const Vec3& rgb, double a) {
        return (rgb + Vec3(u(-a, a), u(-a, a), u(-a, a))).cwiseMax(0.02).cwiseMin(0.98);
    }
};

Intrinsics square(int size, double fov_deg) {
    Intrinsics in;
    in.width = in.height = size;
    in.fx = in.fy = 0.5 * size / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
    in.cx = in.cy = 0.5 * size;
    return in;
}

void build_wall(Builder& b, const SynthOptions& opt) {
    const int size = opt.size > 0 ? opt.size : 512;
    CameraView cam;
    cam.intrinsics = square(size, 53.13);  // focal = size
    b.out.views.push_back(cam);
    b.out.scene.background_color = Vec3(0.05, 0.05, 0.08);

    // A plane of overlapping splats at z = 2, 1.2 sigma apart, slightly wider
    // than the view so the edges are as dense as the centre.
    const double half = 1.15 * 2.0 * 0.5 * size / cam.intrinsics.fx;
    const double sigma = 0.03, spacing = 1.2 * sigma;
    const int n = static_cast<int>(std::ceil(2.0 * half / spacing));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const Vec3 mean(-half + i * spacing, -half + j * spacing, 2.0);
            b.add(mean, Vec3(sigma, sigma, 0.004), 0.75, b.jitter(Vec3(0.75, 0.2, 0.15), 0.05), kVehicle);
        }

    const double back = 1.1 * 5.0 * 0.5 * size / cam.intrinsics.fx;
    for (int k = 0; k < 500; ++k) {
        const Vec3 mean(b.u(-back, back), b.u(-back, back), 5.0 + b.u(-0.02, 0.02));
        const double s = b.u(0.35, 0.6);
        b.add(mean, Vec3(s, s * b.u(0.6, 1.0), 0.05), b.u(0.15, 0.35), b.jitter(Vec3(0.3, 0.55, 0.3), 0.2),
              kVegetation);
    }
}

void build_street(Builder& b, const SynthOptions& opt) {
    const int size = opt.size > 0 ? opt.size : 64;
    const int nviews = opt.views > 0 ? opt.views : 8;
    auto& scene = b.out.scene;
    scene.background_color = Vec3(0.55, 0.7, 0.9);

    // road: y = +1 is the ground (camera y points down), x in [-4, 4], z in [2, 12]
    for (double z = 1.0; z <= 12.0; z += 0.8)
        for (double x = -4.0; x <= 4.0; x += 0.8)
            b.add(Vec3(x + b.u(-0.1, 0.1), 1.0, z + b.u(-0.1, 0.1)), Vec3(0.45, 0.02, 0.45), 0.9,
                  b.jitter(Vec3(0.35, 0.35, 0.37), 0.05), kRoad);
    // building facade at z = 12
    for (double y = -3.0; y <= 1.0; y += 0.5)
        for (double x = -5.0; x <= 5.0; x += 0.6) {
            const bool window = std::fmod(std::abs(x + 5.0), 1.8) < 0.7 && y < 0.0;
            const Vec3 rgb = window ? Vec3(0.2, 0.25, 0.35) : Vec3(0.75, 0.65, 0.5);
            b.add(Vec3(x, y, 12.0 + b.u(-0.05, 0.05)), Vec3(0.35, 0.3, 0.05), 0.95, b.jitter(rgb, 0.04), kBuilding);
        }
    // pedestrians: vertical stacks of blobs on the sidewalk
    const Vec3 ped_pos[] = {Vec3(-2.2, 0.0, 6.0), Vec3(2.5, 0.0, 7.5), Vec3(-1.0, 0.0, 9.0)};
    for (const Vec3& p : ped_pos) {
        const Vec3 shirt = b.jitter(Vec3(0.2, 0.3, 0.8), 0.2);
        for (int k = 0; k < 6; ++k) {
            const double y = 0.9 - 0.3 * k;
            const Vec3 rgb = k == 5 ? Vec3(0.85, 0.7, 0.6) : k < 2 ? Vec3(0.15, 0.15, 0.2) : shirt;
            b.add(p + Vec3(b.u(-0.03, 0.03), y, b.u(-0.03, 0.03)), Vec3(0.12, 0.14, 0.1), 0.9, rgb, kPedestrian);
        }
    }
    // vehicle: a box of blobs in its local frame, driving along +x
    DynamicObject car;
    car.object_id = 0;
    const Vec3 body = b.jitter(Vec3(0.8, 0.15, 0.1), 0.1);
    for (double x = -1.0; x <= 1.0; x += 0.4)
        for (double y = -0.6; y <= 0.0; y += 0.3)
            for (double z = -0.4; z <= 0.4; z += 0.4) {
                const Vec3 rgb = y < -0.5 ? Vec3(0.25, 0.3, 0.35) : body;
                DynamicGaussian dg;
                dg.primitive = b.make(Vec3(x, y, z), Vec3(0.22, 0.16, 0.22), 0.9, rgb, kVehicle);
                dg.appearance = TimeVaryingSH::zeros(0, 1, 1.0);
                dg.appearance.a0 = dg.primitive.sh;
                dg.appearance.cos_coeffs[0][0] = Vec3(0.1, 0.05, 0.0);  // slow shimmer over the sequence
                car.gaussians.push_back(dg);
            }
    for (int k = 0; k < nviews; ++k) {
        ObjectPose pose;
        pose.timestamp = static_cast<double>(k) / nviews;
        pose.translation = Vec3(-1.5 + 3.0 * pose.timestamp, 0.7, 5.0);
        car.poses.push_back(pose);
    }
    scene.dynamic_objects.push_back(std::move(car));

    for (int k = 0; k < nviews; ++k) {
        const double a = (static_cast<double>(k) / std::max(1, nviews - 1) - 0.5) * 0.5;
        const Vec3 target(0.0, 0.3, 7.0);
        const Vec3 eye = target + Vec3(7.0 * std::sin(a), -1.2, -7.0 * std::cos(a));
        CameraView cam = CameraView::look_at(eye, target, Vec3(0.0, -1.0, 0.0), square(size, 60.0));
        cam.view_id = k;
        cam.timestamp = static_cast<double>(k) / nviews;
        b.out.views.push_back(cam);
    }
}

void build_random(Builder& b, const SynthOptions& opt) {
    const int size = opt.size > 0 ? opt.size : 64;
    const int nviews = opt.views > 0 ? opt.views : 4;
    b.out.scene.background_color = Vec3(0.1, 0.1, 0.1);
    for (int k = 0; k < opt.count; ++k) {
        const Vec3 mean(b.u(-1.0, 1.0), b.u(-1.0, 1.0), b.u(-1.0, 1.0));
        const Vec3 sigma(b.u(0.05, 0.25), b.u(0.05, 0.25), b.u(0.05, 0.25));
        const bool crit = uniform01(b.rng) < 0.3;
        GaussianPrimitive g = b.make(mean, sigma, b.u(0.3, 0.95), Vec3(b.u(0, 1), b.u(0, 1), b.u(0, 1)),
                                     crit ? kVehicle : kBuilding);
        std::normal_distribution<double> n(0.0, 1.0);
        g.rotation = Quat(n(b.rng), n(b.rng), n(b.rng), n(b.rng)).normalized();
        b.out.scene.static_gaussians.push_back(g);
    }
    for (int k = 0; k < nviews; ++k) {
        const double a = 2.0 * std::numbers::pi * k / nviews;
        const Vec3 eye(4.0 * std::sin(a), -0.5, -4.0 * std::cos(a));
        CameraView cam = CameraView::look_at(eye, Vec3::Zero(), Vec3(0.0, -1.0, 0.0), square(size, 50.0));
        cam.view_id = k;
        b.out.views.push_back(cam);
    }
}

}  // namespace

SemanticMask render_ground_truth(const SceneModel& scene, CameraView& view,
                                 const std::map<GaussianId, std::int32_t>& labels,
                                 const SemanticClassTable& classes) {
    const auto world = compose_world(scene, view.timestamp);
    std::vector<std::size_t> source;
    const auto splats = make_splats(world, view, &source);
    const int w = view.width(), h = view.height();
    const RenderTarget gt = reference_render_splats(splats, w, h, scene.background_color);
    view.gt_image = gt.color;

    std::vector<std::int32_t> splat_label(splats.size());
    std::map<std::int32_t, bool> present;  // label -> critical
    for (std::size_t k = 0; k < splats.size(); ++k) {
        const auto it = labels.find(world[source[k]].id);
        splat_label[k] = it == labels.end() ? kSkyLabel : it->second;
        present[splat_label[k]] = criticality(splat_label[k], classes);
    }
    auto coverage = [&](auto&& pick) {
        std::vector<std::uint8_t> flag(splats.size());
        for (std::size_t k = 0; k < splats.size(); ++k) flag[k] = pick(splat_label[k]) ? 1 : 0;
        return reference_coverage(splats, flag, w, h);
    };
    const auto crit_total = coverage([&](std::int32_t l) { return present.at(l); });
    std::vector<std::int32_t> crit, non;
    for (const auto& [label, is_crit] : present) (is_crit ? crit : non).push_back(label);
    // A single class in a group is covered by the group total; only mixed
    // groups need a pass per class.
    std::map<std::int32_t, std::vector<double>> cov;
    for (const auto* group : {&crit, &non})
        if (group->size() > 1)
            for (std::int32_t label : *group) cov[label] = coverage([&](std::int32_t l) { return l == label; });

    const std::size_t npix = static_cast<std::size_t>(w) * h;
    SemanticMask mask{view.view_id, w, h, std::vector<std::int32_t>(npix, kSkyLabel)};
    for (std::size_t p = 0; p < npix; ++p) {
        const double sky = gt.transmittance[p];
        std::int32_t best = kSkyLabel;
        if (crit_total[p] > 0.5) {
            best = crit.front();
            for (std::int32_t l : crit)
                if (cov.count(l) && cov[l][p] > cov[best][p]) best = l;
        } else {
            double best_cov = sky;
            for (std::int32_t l : non) {
                const double c = non.size() == 1 ? 1.0 - sky - crit_total[p] : cov[l][p];
                if (c > best_cov || (c == best_cov && l < best)) best_cov = c, best = l;
            }
        }
        mask.labels[p] = best;
    }
    view.semantic_mask = mask.labels;
    return mask;
}

SynthScene synth_scene(const SynthOptions& options) {
    Builder b(options.seed);
    if (options.layout == "wall") build_wall(b, options);
    else if (options.layout == "street-toy") build_street(b, options);
    else if (options.layout == "random") build_random(b, options);
    else throw ConfigError("unknown layout '" + options.layout + "' (expected wall, street-toy or random)");
    if (options.count < 0) throw ConfigError("count must be non-negative");
    b.out.scene.validate();
    if (options.render_gt) {
        for (auto& v : b.out.views)
            b.out.masks.push_back(render_ground_truth(b.out.scene, v, b.out.labels, b.out.classes));
    }
    return std::move(b.out);
}

SceneModel perturbed_init(const SceneModel& truth, std::uint64_t seed, double position_noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    SceneModel s = truth;
    auto perturb = [&](GaussianPrimitive& g, ShBlock& sh) {
        g.mean += position_noise * Vec3(n(rng), n(rng), n(rng));
        g.log_scale += Vec3::Constant(std::log(1.3)) + 0.1 * Vec3(n(rng), n(rng), n(rng));
        g.opacity_logit = logit(0.5);
        for (std::size_t k = 0; k < sh.size(); ++k) sh[k] = k == 0 ? Vec3::Constant(0.3 * n(rng)) : Vec3::Zero();
        g.s_sem = 0.0;
        g.critical = false;
    };
    for (auto& g : s.static_gaussians) perturb(g, g.sh);
    for (auto& obj : s.dynamic_objects)
        for (auto& dg : obj.gaussians) {
            perturb(dg.primitive, dg.appearance.a0);
            for (auto& blk : dg.appearance.cos_coeffs)
                for (auto& c : blk) c.setZero();
            for (auto& blk : dg.appearance.sin_coeffs)
                for (auto& c : blk) c.setZero();
        }
    return s;
}

}  // namespace pags
