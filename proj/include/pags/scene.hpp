#pragma once

#include "pags/common.hpp"
#include "pags/sh.hpp"

#include <optional>
#include <vector>

namespace pags {

/// One anisotropic 3D Gaussian. Opacity is stored as a logit and scale as a
/// per-axis log standard deviation.
struct GaussianPrimitive {
    GaussianId id = 0;
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Quat rotation = identity_quat();
    double opacity_logit = 0.0;
    ShBlock sh{Vec3::Zero()};
    double s_sem = 0.0;
    bool critical = false;

    double opacity() const { return sigmoid(opacity_logit); }
    int sh_degree() const { return sh_degree_for_count(sh.size()); }
};

/// A Gaussian living in a dynamic object's local frame. `primitive.sh` is
/// unused; appearance comes from the Fourier coefficients.
struct DynamicGaussian {
    GaussianPrimitive primitive;
    TimeVaryingSH appearance;
};

struct ObjectPose {
    double timestamp = 0.0;
    Quat rotation = identity_quat();
    Vec3 translation = Vec3::Zero();
};

struct DynamicObject {
    int object_id = 0;
    std::vector<DynamicGaussian> gaussians;
    std::vector<ObjectPose> poses;  ///< strictly ascending timestamps
};

enum class PoseLookup {
    Nearest,      ///< pose with the nearest timestamp (ties: earlier pose)
    Interpolate,  ///< linear translation + slerp rotation between neighbours
};

struct SceneModel {
    std::vector<GaussianPrimitive> static_gaussians;
    std::vector<DynamicObject> dynamic_objects;
    Vec3 background_color = Vec3::Zero();

    std::size_t gaussian_count() const;

    /// Smallest id strictly greater than every id in the scene.
    GaussianId next_id() const;

    /// Throws Error when ids collide, poses are unsorted, or a quaternion is
    /// not unit norm within 1e-6.
    void validate() const;
};

struct Intrinsics {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
};

/// Rigid world-to-camera transform: p_cam = R(rotation) p_world + translation.
/// Camera looks down +z with x right and y down; pixel (i, j) is centred at
/// (i + 0.5, j + 0.5).
struct RigidTransform {
    Quat rotation = identity_quat();
    Vec3 translation = Vec3::Zero();
};

struct CameraView {
    int view_id = 0;
    Intrinsics intrinsics;
    RigidTransform world_to_camera;
    double timestamp = 0.0;
    std::optional<std::vector<double>> gt_image;         ///< H*W*3 row-major, [0,1]
    std::optional<std::vector<std::int32_t>> semantic_mask;  ///< H*W label ids

    int width() const { return intrinsics.width; }
    int height() const { return intrinsics.height; }
    Mat3 rotation() const;
    Vec3 camera_center() const;
    Vec3 to_camera(const Vec3& p_world) const;

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    static CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& intr);
};

constexpr double kZNear = 0.01;
constexpr double kAntiAliasFloor = 0.3;

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance_from_params(const Vec3& log_scale, const Quat& rotation);

/// Pose of an object at `time`. Throws Error when the object has no poses.
ObjectPose object_pose_at(const DynamicObject& object, double time, PoseLookup lookup = PoseLookup::Nearest);

/// Index of the pose used by PoseLookup::Nearest at `time`.
std::size_t nearest_pose_index(const DynamicObject& object, double time);

/// Flattens the scene into world-frame Gaussians at `time`: static Gaussians
/// unchanged, dynamic ones transformed by their object pose with SH resolved.
std::vector<GaussianPrimitive> compose_world(const SceneModel& scene, double time,
                                             PoseLookup lookup = PoseLookup::Nearest);

struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;
    bool culled = false;  ///< behind the near plane
};

/// EWA projection: cov2d = J W Sigma W^T J^T + kAntiAliasFloor * I.
ProjectedGaussian project_gaussian(const GaussianPrimitive& g, const CameraView& cam);

}  // namespace pags
