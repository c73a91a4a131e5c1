#pragma once

#include "pags/rasterizer.hpp"
#include "pags/scene.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pags {

/// Location of a composed-world Gaussian inside the SceneModel.
struct GaussianRef {
    int object = -1;        ///< -1 for static
    std::size_t index = 0;  ///< index within static_gaussians or object gaussians
};

/// Maps compose_world output order back to scene storage.
std::vector<GaussianRef> world_index_map(const SceneModel& scene);

/// Parameter class, used for per-class learning rates.
enum class ParamClass { Position, Scale, Rotation, Opacity, Appearance, PoseRotation, PoseTranslation };

/// Gradient of one Gaussian, laid out like its parameters. For dynamic
/// Gaussians `sh` holds the a0 gradient and `cos_coeffs`/`sin_coeffs` the
/// Fourier ones.
struct GaussianGrad {
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Quat rotation = Quat::Zero();
    double opacity_logit = 0.0;
    ShBlock sh;
    std::vector<ShBlock> cos_coeffs;
    std::vector<ShBlock> sin_coeffs;
};

struct PoseGrad {
    Quat rotation = Quat::Zero();
    Vec3 translation = Vec3::Zero();
};

/// Per-parameter gradients of one frame plus the per-Gaussian statistics
/// the optimizer accumulates (indexed in compose_world order).
struct BackwardBuffers {
    std::vector<GaussianGrad> static_grads;
    std::vector<std::vector<GaussianGrad>> dynamic_grads;
    std::vector<std::vector<PoseGrad>> pose_grads;
    std::vector<double> sgrad;             ///< raw squared-gradient contribution
    std::vector<double> mean2d_grad_norm;  ///< |dL/d mean2d| this frame
    std::vector<std::uint8_t> visible;     ///< 1 when the Gaussian produced a splat
};

BackwardBuffers zero_buffers(const SceneModel& scene);

/// Per-frame modifiers applied on top of the stored scene.
struct FrameOptions {
    PoseLookup lookup = PoseLookup::Nearest;
    RasterConfig raster;
    /// Per world Gaussian: 0 drops it for this frame. Empty = keep all.
    std::vector<std::uint8_t> keep;
    /// Per world Gaussian opacity multiplier (effective opacity is clamped to 1).
    /// Empty = 1 for all.
    std::vector<double> opacity_scale;
};

struct FrameRender {
    std::vector<GaussianPrimitive> world;   ///< compose_world(scene, cam.timestamp)
    std::vector<std::size_t> splat_source;  ///< splat index -> world index
    ForwardResult forward;
};

/// compose -> project -> resolve SH -> rasterize_forward.
FrameRender render_frame(const SceneModel& scene, const CameraView& cam, const FrameOptions& options = {});

/// Chains rasterize_backward through projection, SH evaluation, covariance
/// construction, opacity activation and object poses.
BackwardBuffers backward_frame(const SceneModel& scene, const CameraView& cam, const FrameRender& frame,
                               std::span<const double> dL_dcolor, const FrameOptions& options = {});

/// Visits every optimizable scalar of the scene together with its gradient in
/// a fixed order: static Gaussians, then per object its Gaussians and poses.
/// Used by the optimizer update and by finite-difference tests.
void for_each_parameter(SceneModel& scene, const BackwardBuffers& grads,
                        const std::function<void(double& value, double grad, ParamClass cls)>& fn);

using ParamVisitor = std::function<void(double& value, double grad, ParamClass cls)>;

/// Visits one Gaussian's parameters in layout order. `appearance` is null for
/// static Gaussians.
void for_each_gaussian_parameter(GaussianPrimitive& g, TimeVaryingSH* appearance, const GaussianGrad& grad,
                                 const ParamVisitor& fn);

void for_each_pose_parameter(ObjectPose& pose, const PoseGrad& grad, const ParamVisitor& fn);

/// Number of scalars visited by for_each_parameter.
std::size_t parameter_count(const SceneModel& scene);

}  // namespace pags
