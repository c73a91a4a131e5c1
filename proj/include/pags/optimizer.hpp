#pragma once

#include "pags/pipeline.hpp"
#include "pags/scene.hpp"

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pags {

/// Per-class learning rates. The position rate decays exponentially from
/// `position` to `position_final` over the run.
struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6;
    double sh = 2.5e-3;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;
    double pose = 1e-4;
};

struct TrainConfig {
    double alpha = 0.4;  ///< weight of s_sem in the hybrid score
    double beta = 0.5;   ///< semantic modulation of the dropout probability
    double gamma = 0.25; ///< dropout probability at the end of the run for s_sem = 0

    /// Milestones below are in full-length iterations and multiplied by
    /// schedule_scale (rounded to nearest).
    double schedule_scale = 0.1;
    int t_total = 30000;
    std::vector<int> densify_milestones{10000, 15000, 20000};
    double prune_rate = 0.60;
    int finetune_start = 25000;
    int finetune_interval = 5000;
    double finetune_rate = 0.30;

    bool densify = true;
    /// Mean screen-space positional gradient above which a Gaussian is
    /// densified, in NDC units (pixel gradient times half the image width).
    /// Densification is skipped when a milestone is the final iteration.
    double densify_grad_threshold = 2e-4;
    /// Gaussians whose largest axis is at most this fraction of the camera
    /// extent are cloned; larger ones are split.
    double percent_dense = 0.01;

    LearningRates lr;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    double ssim_weight = 0.2;
    PoseLookup lookup = PoseLookup::Nearest;
    RasterConfig raster;
    std::uint64_t seed = 0;

    /// Written (as PLY) when training aborts on a non-finite loss.
    std::string snapshot_path;

    int scaled(int iteration) const;
    int scaled_total() const { return scaled(t_total); }

    /// Throws ConfigError when a value is out of range.
    void validate() const;
};

/// alpha * s_sem + (1 - alpha) * s_grad.
double hybrid_score(double s_sem, double s_grad, double alpha);

/// Drop probability (1 - beta * s_sem) * gamma * t / t_total.
double dropout_probability(double s_sem, double t, double t_total, double beta, double gamma);

/// Opacity compensation 1 / (1 - D). Throws ConfigError when D is outside [0, 1).
double compensation_factor(double drop_probability);

struct ImportanceEntry {
    double s_sem = 0.0;
    double raw_grad = 0.0;
    double s_grad = 0.0;
    double s_hybrid = 0.0;
    std::uint64_t drops = 0;
};

struct ImportanceState {
    double alpha = 0.4;
    std::map<GaussianId, ImportanceEntry> entries;

    /// Entries for every Gaussian of `scene` (s_sem cached from the scene).
    static ImportanceState from_scene(const SceneModel& scene, double alpha);

    /// Adds missing Gaussians and drops entries for ids no longer present.
    void sync(const SceneModel& scene);

    /// s_hybrid from the current s_sem / s_grad.
    void refresh_hybrid();
};

/// s_grad = raw / max(raw) (all zero when the max is 0), then raw reset and
/// s_hybrid refreshed.
void normalize_grad_scores(ImportanceState& state);

struct PruneEvent {
    int iteration = 0;
    double rate = 0.0;
    double alpha = 0.0;  ///< weight of s_sem in the ranking (0: s_grad only)
    std::vector<GaussianId> removed;
    std::size_t count_before = 0;
    std::size_t count_after = 0;
};

/// Removes the ceil(rate * N) Gaussians with the lowest s_hybrid (ties: lower
/// id first). Their importance entries are discarded. Throws ConfigError for
/// rate outside [0, 1).
PruneEvent prune_step(SceneModel& scene, ImportanceState& state, double rate, int iteration = 0);

struct DropoutSample {
    std::vector<std::uint8_t> keep;    ///< per world Gaussian
    std::vector<double> compensation;  ///< per world Gaussian, 1 / (1 - D)
    std::size_t dropped = 0;
};

/// Samples which world Gaussians (compose_world order) are omitted at
/// iteration t and their compensation factors. Drop counts are added to
/// `state`.
DropoutSample apply_dropout(const SceneModel& scene, ImportanceState& state, const TrainConfig& config, double t,
                            double t_total, std::mt19937_64& rng);

struct DensifyStats {
    double grad_sum = 0.0;
    std::uint64_t count = 0;
};

struct DensifyConfig {
    double grad_threshold = 2e-4;
    double size_threshold = 0.01;  ///< world units; larger Gaussians are split
};

struct DensifyEvent {
    int iteration = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t count_before = 0;
    std::size_t count_after = 0;
};

/// Clones small and splits large Gaussians whose mean positional gradient
/// exceeds the threshold. Split Gaussians are replaced by two samples of the
/// parent distribution with log_scale reduced by ln 1.6; clones are jittered
/// copies. Children get fresh ids and inherit s_sem and critical.
DensifyEvent densify_step(SceneModel& scene, const std::map<GaussianId, DensifyStats>& stats,
                          const DensifyConfig& config, std::mt19937_64& rng, int iteration = 0);

/// Adam with moment buffers keyed by Gaussian id (and by object/pose index
/// for poses).
class AdamOptimizer {
public:
    explicit AdamOptimizer(const TrainConfig& config) : config_(config) {}

    /// One update of every parameter with per-class rates; quaternions are
    /// renormalized afterwards.
    void step(SceneModel& scene, const BackwardBuffers& grads, int iteration);

    /// Discards moments of Gaussians no longer in the scene.
    void sync(const SceneModel& scene);

    std::size_t tracked() const { return gaussian_moments_.size(); }
    double position_lr(int iteration) const;

private:
    struct Moments {
        std::vector<double> m, v;
    };
    void update(Moments& mom, std::size_t k, double& value, double grad, double lr);

    TrainConfig config_;
    std::uint64_t steps_ = 0;
    std::map<GaussianId, Moments> gaussian_moments_;
    std::map<std::pair<int, std::size_t>, Moments> pose_moments_;
};

struct IterationRecord {
    int iteration = 0;
    double loss = 0.0;
    double psnr = 0.0;
    std::size_t gaussian_count = 0;
    std::size_t dropped_count = 0;
};

struct TrainResult {
    SceneModel scene;
    std::vector<IterationRecord> log;
    std::vector<PruneEvent> prune_events;
    std::vector<DensifyEvent> densify_events;
};

struct EvalResult {
    double loss = 0.0;
    double psnr = 0.0;
};

/// Mean photometric loss and PSNR over views with ground truth, rendered
/// without dropout.
EvalResult evaluate_views(const SceneModel& scene, std::span<const CameraView> views, const TrainConfig& config);

/// Runs config.scaled_total() iterations. Milestone events run after the
/// update of that iteration: normalize -> prune -> densify at densify
/// milestones, normalize -> prune from finetune_start every finetune_interval.
/// Throws NumericalError on a non-finite loss.
TrainResult train(SceneModel scene, std::span<const CameraView> views, const TrainConfig& config,
                  std::ostream* log_stream = nullptr);

/// Writes one `key=value` line per record, preceded by a version header.
void write_log_header(std::ostream& os);
void write_log_record(std::ostream& os, const IterationRecord& r);
void write_prune_event(std::ostream& os, const PruneEvent& e);
void write_densify_event(std::ostream& os, const DensifyEvent& e);

}  // namespace pags
