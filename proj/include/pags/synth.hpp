#pragma once

#include "pags/scene.hpp"
#include "pags/semantic.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pags {

/// Fixture layouts:
///  - "wall": a critical wall at depth 2 with non-critical splats behind it at
///    depth 5, one 512x512 view (occlusion benchmark).
///  - "street-toy": road and building backdrop, a moving vehicle (dynamic
///    object) and pedestrian blobs, seen by several 64x64 views over time.
///  - "random": `count` random Gaussians in front of a few cameras.
struct SynthOptions {
    std::string layout = "street-toy";
    std::uint64_t seed = 7;
    int count = 200;      ///< Gaussians of the random layout
    int size = 0;         ///< square view size; 0 = layout default
    int views = 0;        ///< 0 = layout default
    bool render_gt = true;  ///< fill gt images and masks with the reference renderer
};

struct SynthScene {
    SceneModel scene;  ///< ground truth; s_sem is 1 for critical Gaussians, else 0
    std::vector<CameraView> views;
    std::vector<SemanticMask> masks;  ///< empty unless render_gt
    std::map<GaussianId, std::int32_t> labels;  ///< ground-truth class per Gaussian
    SemanticClassTable classes = SemanticClassTable::defaults();
};

/// Deterministic in (layout, seed, count, size, views). Throws ConfigError for
/// an unknown layout.
SynthScene synth_scene(const SynthOptions& options);

/// Per pixel: the critical class with the largest coverage when critical
/// splats cover more than half of the pixel in the reference render,
/// otherwise the non-critical class (the background counting as sky) with the
/// largest coverage. Sets gt_image and semantic_mask of `view`.
SemanticMask render_ground_truth(const SceneModel& scene, CameraView& view,
                                 const std::map<GaussianId, std::int32_t>& labels, const SemanticClassTable& classes);

/// A training start: the same Gaussians with jittered means and scales,
/// flattened colors, lowered opacity and cleared semantic fields.
SceneModel perturbed_init(const SceneModel& truth, std::uint64_t seed, double position_noise = 0.05);

constexpr std::int32_t kSkyLabel = 4;

}  // namespace pags
