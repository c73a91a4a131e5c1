#pragma once

#include "pags/scene.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pags {

struct SemanticClass {
    std::string name;
    bool critical = false;
};

/// label id -> class. The default table marks vehicle, pedestrian and cyclist
/// as critical.
struct SemanticClassTable {
    std::map<std::int32_t, SemanticClass> classes;

    static SemanticClassTable defaults();

    /// Parses lines of the form `label_id = name, critical_flag`. `#` starts a
    /// comment. Throws ParseError on malformed lines.
    static SemanticClassTable parse(const std::string& text);
    static SemanticClassTable load(const std::string& path);
};

struct SemanticMask {
    int view_id = 0;
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;  ///< row-major H*W

    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Critical flag of `label`. Unknown labels are non-critical and log a warning.
bool criticality(std::int32_t label, const SemanticClassTable& table);

struct SemanticScore {
    double s_sem = 0.0;
    bool critical = false;
    int visible_views = 0;
};

/// Majority label of the 3x3 neighbourhood around pixel (px, py), clipped to
/// the image. Ties go to the smallest label id.
std::int32_t majority_label(const SemanticMask& mask, int px, int py);

/// Scores every Gaussian in compose_world order. A view counts for a Gaussian
/// when its projected mean lies inside the image in front of the camera; the
/// score is the fraction of those views whose sampled label is critical.
/// Dynamic-object Gaussians all receive their object's mean score and the
/// majority critical flag of its visible members.
/// Throws ConfigError for an empty view list and DimensionError when a mask
/// does not match its view.
std::vector<SemanticScore> compute_semantic_scores(const SceneModel& scene, std::span<const CameraView> views,
                                                   std::span<const SemanticMask> masks,
                                                   const SemanticClassTable& table,
                                                   PoseLookup lookup = PoseLookup::Nearest);

/// Writes s_sem and critical into the scene (compose_world order).
void apply_semantic_scores(SceneModel& scene, std::span<const SemanticScore> scores);

}  // namespace pags
