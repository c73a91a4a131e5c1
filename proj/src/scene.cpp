#include "pags/scene.hpp"

#include "pags/quaternion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pags {

std::size_t SceneModel::gaussian_count() const {
    std::size_t n = static_gaussians.size();
    for (const auto& obj : dynamic_objects) n += obj.gaussians.size();
    return n;
}

GaussianId SceneModel::next_id() const {
    GaussianId next = 0;
    for (const auto& g : static_gaussians) next = std::max(next, g.id + 1);
    for (const auto& obj : dynamic_objects) {
        for (const auto& dg : obj.gaussians) next = std::max(next, dg.primitive.id + 1);
    }
    return next;
}

void SceneModel::validate() const {
    std::unordered_set<GaussianId> seen;
    auto check = [&](const GaussianPrimitive& g) {
        if (!seen.insert(g.id).second) throw Error("duplicate gaussian id " + std::to_string(g.id));
        if (std::abs(g.rotation.norm() - 1.0) > 1e-6) {
            throw Error("gaussian " + std::to_string(g.id) + " rotation is not unit norm");
        }
        if (g.s_sem < 0.0 || g.s_sem > 1.0) throw Error("gaussian " + std::to_string(g.id) + " s_sem out of [0,1]");
    };
    for (const auto& g : static_gaussians) check(g);
    for (const auto& obj : dynamic_objects) {
        for (const auto& dg : obj.gaussians) check(dg.primitive);
        for (std::size_t i = 0; i < obj.poses.size(); ++i) {
            if (std::abs(obj.poses[i].rotation.norm() - 1.0) > 1e-6) {
                throw Error("object " + std::to_string(obj.object_id) + " pose rotation is not unit norm");
            }
            if (i > 0 && !(obj.poses[i].timestamp > obj.poses[i - 1].timestamp)) {
                throw Error("object " + std::to_string(obj.object_id) + " poses are not strictly ascending");
            }
        }
    }
}

Mat3 CameraView::rotation() const { return quat::to_matrix(world_to_camera.rotation); }

Vec3 CameraView::camera_center() const { return -(rotation().transpose() * world_to_camera.translation); }

Vec3 CameraView::to_camera(const Vec3& p_world) const { return rotation() * p_world + world_to_camera.translation; }

CameraView CameraView::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& intr) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.unitOrthogonal();
    right.normalize();
    const Vec3 down = forward.cross(right);
    // rows of the world-to-camera rotation are the camera axes in world frame
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    const Eigen::Quaterniond q(r);
    CameraView cam;
    cam.intrinsics = intr;
    cam.world_to_camera.rotation = Quat(q.w(), q.x(), q.y(), q.z()).normalized();
    cam.world_to_camera.translation = -(r * eye);
    return cam;
}

Mat3 covariance_from_params(const Vec3& log_scale, const Quat& rotation) {
    const Mat3 r = quat::to_matrix(rotation);
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = r * s.asDiagonal();
    Mat3 sigma = m * m.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

std::size_t nearest_pose_index(const DynamicObject& object, double time) {
    if (object.poses.empty()) throw Error("object " + std::to_string(object.object_id) + " has no poses");
    const auto& poses = object.poses;
    auto it = std::lower_bound(poses.begin(), poses.end(), time,
                               [](const ObjectPose& p, double t) { return p.timestamp < t; });
    if (it == poses.begin()) return 0;
    if (it == poses.end()) return poses.size() - 1;
    const auto hi = static_cast<std::size_t>(it - poses.begin());
    const std::size_t lo = hi - 1;
    return (time - poses[lo].timestamp) <= (poses[hi].timestamp - time) ? lo : hi;
}

ObjectPose object_pose_at(const DynamicObject& object, double time, PoseLookup lookup) {
    const std::size_t idx = nearest_pose_index(object, time);
    if (lookup == PoseLookup::Nearest) return object.poses[idx];
    const auto& poses = object.poses;
    if (time <= poses.front().timestamp) return poses.front();
    if (time >= poses.back().timestamp) return poses.back();
    auto it = std::upper_bound(poses.begin(), poses.end(), time,
                               [](double t, const ObjectPose& p) { return t < p.timestamp; });
    const ObjectPose& b = *it;
    const ObjectPose& a = *(it - 1);
    const double u = (time - a.timestamp) / (b.timestamp - a.timestamp);
    ObjectPose out;
    out.timestamp = time;
    out.translation = (1.0 - u) * a.translation + u * b.translation;
    out.rotation = quat::normalized(quat::slerp(a.rotation, b.rotation, u));
    return out;
}

std::vector<GaussianPrimitive> compose_world(const SceneModel& scene, double time, PoseLookup lookup) {
    std::vector<GaussianPrimitive> out;
    out.reserve(scene.gaussian_count());
    out.insert(out.end(), scene.static_gaussians.begin(), scene.static_gaussians.end());
    for (const auto& obj : scene.dynamic_objects) {
        const ObjectPose pose = object_pose_at(obj, time, lookup);
        const Mat3 r = quat::to_matrix(pose.rotation);
        for (const auto& dg : obj.gaussians) {
            GaussianPrimitive g = dg.primitive;
            g.mean = r * dg.primitive.mean + pose.translation;
            g.rotation = quat::multiply(pose.rotation, dg.primitive.rotation);
            g.sh = resolve_time_varying_sh(dg.appearance, time);
            out.push_back(std::move(g));
        }
    }
    return out;
}

ProjectedGaussian project_gaussian(const GaussianPrimitive& g, const CameraView& cam) {
    ProjectedGaussian p;
    const Mat3 w = cam.rotation();
    const Vec3 t = w * g.mean + cam.world_to_camera.translation;
    p.depth = t.z();
    if (t.z() <= kZNear) {
        p.culled = true;
        return p;
    }
    const auto& in = cam.intrinsics;
    const double iz = 1.0 / t.z();
    p.mean2d = Vec2(in.fx * t.x() * iz + in.cx, in.fy * t.y() * iz + in.cy);
    Eigen::Matrix<double, 2, 3> j;
    j << in.fx * iz, 0.0, -in.fx * t.x() * iz * iz,
         0.0, in.fy * iz, -in.fy * t.y() * iz * iz;
    const Mat3 sigma = covariance_from_params(g.log_scale, g.rotation);
    const Eigen::Matrix<double, 2, 3> jw = j * w;
    Mat2 cov = jw * sigma * jw.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov(0, 0) += kAntiAliasFloor;
    cov(1, 1) += kAntiAliasFloor;
    p.cov2d = cov;
    return p;
}

}  // namespace pags
