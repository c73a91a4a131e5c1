#include "pags/pipeline.hpp"

#include "pags/quaternion.hpp"

#include <cmath>
#include <numbers>

namespace pags {

std::vector<GaussianRef> world_index_map(const SceneModel& scene) {
    std::vector<GaussianRef> map;
    map.reserve(scene.gaussian_count());
    for (std::size_t i = 0; i < scene.static_gaussians.size(); ++i) map.push_back({-1, i});
    for (std::size_t o = 0; o < scene.dynamic_objects.size(); ++o) {
        for (std::size_t i = 0; i < scene.dynamic_objects[o].gaussians.size(); ++i) {
            map.push_back({static_cast<int>(o), i});
        }
    }
    return map;
}

namespace {

GaussianGrad zero_grad_like(const GaussianPrimitive& g) {
    GaussianGrad gr;
    gr.sh.assign(g.sh.size(), Vec3::Zero());
    return gr;
}

GaussianGrad zero_grad_like(const DynamicGaussian& dg) {
    GaussianGrad gr;
    const auto& a = dg.appearance;
    gr.sh.assign(a.a0.size(), Vec3::Zero());
    gr.cos_coeffs.assign(a.cos_coeffs.size(), ShBlock(a.a0.size(), Vec3::Zero()));
    gr.sin_coeffs.assign(a.sin_coeffs.size(), ShBlock(a.a0.size(), Vec3::Zero()));
    return gr;
}

double effective_opacity(double opacity, double scale) { return std::min(1.0, scale * opacity); }

}  // namespace

BackwardBuffers zero_buffers(const SceneModel& scene) {
    BackwardBuffers b;
    b.static_grads.reserve(scene.static_gaussians.size());
    for (const auto& g : scene.static_gaussians) b.static_grads.push_back(zero_grad_like(g));
    for (const auto& obj : scene.dynamic_objects) {
        auto& grads = b.dynamic_grads.emplace_back();
        grads.reserve(obj.gaussians.size());
        for (const auto& dg : obj.gaussians) grads.push_back(zero_grad_like(dg));
        b.pose_grads.emplace_back(obj.poses.size());
    }
    const std::size_t n = scene.gaussian_count();
    b.sgrad.assign(n, 0.0);
    b.mean2d_grad_norm.assign(n, 0.0);
    b.visible.assign(n, 0);
    return b;
}

FrameRender render_frame(const SceneModel& scene, const CameraView& cam, const FrameOptions& options) {
    FrameRender fr;
    fr.world = compose_world(scene, cam.timestamp, options.lookup);
    const std::size_t n = fr.world.size();
    if ((!options.keep.empty() && options.keep.size() != n) ||
        (!options.opacity_scale.empty() && options.opacity_scale.size() != n)) {
        throw DimensionError("render_frame: per-Gaussian option arrays do not match the scene");
    }
    std::vector<Splat> splats;
    splats.reserve(n);
    const Vec3 center = cam.camera_center();
    for (std::size_t i = 0; i < n; ++i) {
        if (!options.keep.empty() && !options.keep[i]) continue;
        const auto& g = fr.world[i];
        const ProjectedGaussian p = project_gaussian(g, cam);
        if (p.culled) continue;
        Splat s;
        s.mean2d = p.mean2d;
        s.cov2d = p.cov2d;
        s.depth = p.depth;
        const double scale = options.opacity_scale.empty() ? 1.0 : options.opacity_scale[i];
        s.opacity = effective_opacity(g.opacity(), scale);
        s.priority = g.s_sem;
        s.color = evaluate_sh(g.sh, (g.mean - center).normalized(), g.sh_degree());
        splats.push_back(s);
        fr.splat_source.push_back(i);
    }
    fr.forward = rasterize_forward(splats, cam.width(), cam.height(), scene.background_color, options.raster);
    return fr;
}

BackwardBuffers backward_frame(const SceneModel& scene, const CameraView& cam, const FrameRender& frame,
                               std::span<const double> dL_dcolor, const FrameOptions& options) {
    const auto splat_grads = rasterize_backward(frame.forward.record, dL_dcolor);
    BackwardBuffers out = zero_buffers(scene);
    const auto map = world_index_map(scene);
    const Mat3 w = cam.rotation();
    const Vec3 center = cam.camera_center();
    const auto& in = cam.intrinsics;

    // object poses as used by compose_world
    std::vector<ObjectPose> poses;
    std::vector<std::size_t> pose_index;
    for (const auto& obj : scene.dynamic_objects) {
        poses.push_back(object_pose_at(obj, cam.timestamp, options.lookup));
        pose_index.push_back(nearest_pose_index(obj, cam.timestamp));
    }

    for (std::size_t s = 0; s < splat_grads.size(); ++s) {
        const std::size_t wi = frame.splat_source[s];
        const GaussianPrimitive& g = frame.world[wi];
        const SplatGrad& sg = splat_grads[s];
        out.sgrad[wi] += sg.sgrad;
        out.mean2d_grad_norm[wi] = sg.mean2d.norm();
        out.visible[wi] = 1;

        // appearance
        const Vec3 v = g.mean - center;
        const double r = v.norm();
        const Vec3 dir = v / r;
        const ShGrad shg = evaluate_sh_backward(g.sh, dir, g.sh_degree(), sg.color);
        Vec3 d_mean = (Mat3::Identity() - dir * dir.transpose()) * shg.view_dir / r;

        // opacity activation
        const double scale = options.opacity_scale.empty() ? 1.0 : options.opacity_scale[wi];
        const double sig = g.opacity();
        const double d_logit = (scale * sig < 1.0) ? sg.opacity * scale * sig * (1.0 - sig) : 0.0;

        // projection
        const Vec3 t = w * g.mean + cam.world_to_camera.translation;
        const double iz = 1.0 / t.z();
        const double iz2 = iz * iz;
        Eigen::Matrix<double, 2, 3> j;
        j << in.fx * iz, 0.0, -in.fx * t.x() * iz2,
             0.0, in.fy * iz, -in.fy * t.y() * iz2;
        Vec3 d_t(in.fx * iz * sg.mean2d.x(), in.fy * iz * sg.mean2d.y(),
                 -in.fx * t.x() * iz2 * sg.mean2d.x() - in.fy * t.y() * iz2 * sg.mean2d.y());

        const Mat3 sigma = covariance_from_params(g.log_scale, g.rotation);
        const Mat3 m = w * sigma * w.transpose();
        const Mat2& g2 = sg.cov2d;
        const Mat3 d_m = j.transpose() * g2 * j;
        const Eigen::Matrix<double, 2, 3> d_j = 2.0 * g2 * j * m;
        d_t.x() += d_j(0, 2) * (-in.fx * iz2);
        d_t.y() += d_j(1, 2) * (-in.fy * iz2);
        d_t.z() += d_j(0, 0) * (-in.fx * iz2) + d_j(0, 2) * (2.0 * in.fx * t.x() * iz2 * iz) +
                   d_j(1, 1) * (-in.fy * iz2) + d_j(1, 2) * (2.0 * in.fy * t.y() * iz2 * iz);
        d_mean += w.transpose() * d_t;

        // Sigma = R diag(s^2) R^T
        const Mat3 d_sigma = w.transpose() * d_m * w;
        const Mat3 rot = quat::to_matrix(g.rotation);
        const Vec3 s2 = (2.0 * g.log_scale).array().exp();
        const Mat3 rgr = rot.transpose() * d_sigma * rot;
        const Vec3 d_log_scale(2.0 * s2.x() * rgr(0, 0), 2.0 * s2.y() * rgr(1, 1), 2.0 * s2.z() * rgr(2, 2));
        const Mat3 d_rot = 2.0 * d_sigma * rot * s2.asDiagonal();
        const Quat d_q_world = quat::matrix_grad_to_quat(g.rotation, d_rot);

        const GaussianRef ref = map[wi];
        if (ref.object < 0) {
            GaussianGrad& gg = out.static_grads[ref.index];
            gg.mean += d_mean;
            gg.log_scale += d_log_scale;
            gg.rotation += d_q_world;
            gg.opacity_logit += d_logit;
            for (std::size_t k = 0; k < gg.sh.size(); ++k) gg.sh[k] += shg.coeffs[k];
            continue;
        }

        const auto o = static_cast<std::size_t>(ref.object);
        const DynamicObject& obj = scene.dynamic_objects[o];
        const DynamicGaussian& local = obj.gaussians[ref.index];
        const ObjectPose& pose = poses[o];
        const Mat3 rc = quat::to_matrix(pose.rotation);
        GaussianGrad& gg = out.dynamic_grads[o][ref.index];
        gg.mean += rc.transpose() * d_mean;
        gg.log_scale += d_log_scale;
        gg.rotation += quat::left_matrix(pose.rotation).transpose() * d_q_world;
        gg.opacity_logit += d_logit;
        const TimeVaryingSH& app = local.appearance;
        for (std::size_t k = 0; k < gg.sh.size(); ++k) gg.sh[k] += shg.coeffs[k];
        for (int mi = 1; mi <= app.order; ++mi) {
            const double phase = 2.0 * std::numbers::pi * mi * cam.timestamp / app.period;
            const double cm = std::cos(phase), sm = std::sin(phase);
            auto& cb = gg.cos_coeffs[static_cast<std::size_t>(mi - 1)];
            auto& sb = gg.sin_coeffs[static_cast<std::size_t>(mi - 1)];
            for (std::size_t k = 0; k < gg.sh.size(); ++k) {
                cb[k] += cm * shg.coeffs[k];
                sb[k] += sm * shg.coeffs[k];
            }
        }
        if (options.lookup == PoseLookup::Nearest) {
            PoseGrad& pg = out.pose_grads[o][pose_index[o]];
            pg.translation += d_mean;
            pg.rotation += quat::right_matrix(local.primitive.rotation).transpose() * d_q_world;
            pg.rotation += quat::matrix_grad_to_quat(pose.rotation, d_mean * local.primitive.mean.transpose());
        }
    }
    return out;
}

void for_each_gaussian_parameter(GaussianPrimitive& g, TimeVaryingSH* appearance, const GaussianGrad& grad,
                                 const ParamVisitor& fn) {
    for (int i = 0; i < 3; ++i) fn(g.mean[i], grad.mean[i], ParamClass::Position);
    for (int i = 0; i < 3; ++i) fn(g.log_scale[i], grad.log_scale[i], ParamClass::Scale);
    for (int i = 0; i < 4; ++i) fn(g.rotation[i], grad.rotation[i], ParamClass::Rotation);
    fn(g.opacity_logit, grad.opacity_logit, ParamClass::Opacity);
    auto visit_block = [&](ShBlock& block, const ShBlock& gblock) {
        for (std::size_t k = 0; k < block.size(); ++k) {
            for (int c = 0; c < 3; ++c) fn(block[k][c], gblock[k][c], ParamClass::Appearance);
        }
    };
    if (appearance == nullptr) {
        visit_block(g.sh, grad.sh);
        return;
    }
    visit_block(appearance->a0, grad.sh);
    for (std::size_t m = 0; m < appearance->cos_coeffs.size(); ++m) {
        visit_block(appearance->cos_coeffs[m], grad.cos_coeffs[m]);
    }
    for (std::size_t m = 0; m < appearance->sin_coeffs.size(); ++m) {
        visit_block(appearance->sin_coeffs[m], grad.sin_coeffs[m]);
    }
}

void for_each_pose_parameter(ObjectPose& pose, const PoseGrad& grad, const ParamVisitor& fn) {
    for (int i = 0; i < 4; ++i) fn(pose.rotation[i], grad.rotation[i], ParamClass::PoseRotation);
    for (int i = 0; i < 3; ++i) fn(pose.translation[i], grad.translation[i], ParamClass::PoseTranslation);
}

void for_each_parameter(SceneModel& scene, const BackwardBuffers& grads,
                        const std::function<void(double& value, double grad, ParamClass cls)>& fn) {
    for (std::size_t i = 0; i < scene.static_gaussians.size(); ++i) {
        for_each_gaussian_parameter(scene.static_gaussians[i], nullptr, grads.static_grads[i], fn);
    }
    for (std::size_t o = 0; o < scene.dynamic_objects.size(); ++o) {
        auto& obj = scene.dynamic_objects[o];
        for (std::size_t i = 0; i < obj.gaussians.size(); ++i) {
            for_each_gaussian_parameter(obj.gaussians[i].primitive, &obj.gaussians[i].appearance,
                                        grads.dynamic_grads[o][i], fn);
        }
        for (std::size_t p = 0; p < obj.poses.size(); ++p) {
            for_each_pose_parameter(obj.poses[p], grads.pose_grads[o][p], fn);
        }
    }
}

std::size_t parameter_count(const SceneModel& scene) {
    SceneModel copy = scene;
    const BackwardBuffers zero = zero_buffers(scene);
    std::size_t n = 0;
    for_each_parameter(copy, zero, [&](double&, double, ParamClass) { ++n; });
    return n;
}

}  // namespace pags
