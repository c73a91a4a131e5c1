#include "pags/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pags {

SemanticClassTable SemanticClassTable::defaults() {
    SemanticClassTable t;
    t.classes = {
        {0, {"road", false}},    {1, {"sidewalk", false}},  {2, {"building", false}},  {3, {"vegetation", false}},
        {4, {"sky", false}},     {5, {"vehicle", true}},    {6, {"pedestrian", true}}, {7, {"cyclist", true}},
    };
    return t;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_flag(const std::string& v, bool& out) {
    std::string l = v;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "1" || l == "true" || l == "critical" || l == "yes") {
        out = true;
        return true;
    }
    if (l == "0" || l == "false" || l == "noncritical" || l == "non-critical" || l == "no") {
        out = false;
        return true;
    }
    return false;
}

}  // namespace

SemanticClassTable SemanticClassTable::parse(const std::string& text) {
    SemanticClassTable t;
    std::size_t offset = 0;
    while (offset <= text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string::npos) end = text.size();
        std::string line(text.substr(offset, end - offset));
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            const auto comma = line.find(',', eq == std::string::npos ? 0 : eq);
            if (eq == std::string::npos || comma == std::string::npos) {
                throw ParseError("class table line must be 'label_id = name, critical_flag'", offset);
            }
            const std::string id_s = trim(line.substr(0, eq));
            std::int32_t id = 0;
            try {
                std::size_t used = 0;
                id = std::stoi(id_s, &used);
                if (used != id_s.size()) throw std::invalid_argument(id_s);
            } catch (const std::exception&) {
                throw ParseError("bad label id '" + id_s + "'", offset);
            }
            SemanticClass c;
            c.name = trim(line.substr(eq + 1, comma - eq - 1));
            if (!parse_flag(trim(line.substr(comma + 1)), c.critical)) {
                throw ParseError("bad critical flag in class table", offset);
            }
            t.classes[id] = c;
        }
        offset = end + 1;
    }
    return t;
}

SemanticClassTable SemanticClassTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open class table " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool criticality(std::int32_t label, const SemanticClassTable& table) {
    const auto it = table.classes.find(label);
    if (it == table.classes.end()) {
        log_warning("unknown semantic label " + std::to_string(label) + "; treated as non-critical");
        return false;
    }
    return it->second.critical;
}

std::int32_t majority_label(const SemanticMask& mask, int px, int py) {
    std::int32_t labels[9] = {};
    int n = 0;
    for (int y = std::max(0, py - 1); y <= std::min(mask.height - 1, py + 1); ++y)
        for (int x = std::max(0, px - 1); x <= std::min(mask.width - 1, px + 1); ++x) labels[n++] = mask.at(x, y);
    std::sort(labels, labels + n);
    std::int32_t best = labels[0];
    int best_count = 0;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && labels[j] == labels[i]) ++j;
        if (j - i > best_count) {  // strict: ties keep the smaller label
            best = labels[i];
            best_count = j - i;
        }
        i = j;
    }
    return best;
}

std::vector<SemanticScore> compute_semantic_scores(const SceneModel& scene, std::span<const CameraView> views,
                                                   std::span<const SemanticMask> masks,
                                                   const SemanticClassTable& table, PoseLookup lookup) {
    if (views.empty()) throw ConfigError("compute_semantic_scores: no views");
    if (masks.size() != views.size()) throw DimensionError("compute_semantic_scores: one mask per view required");
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto& m = masks[v];
        if (m.width != views[v].width() || m.height != views[v].height() ||
            m.labels.size() != static_cast<std::size_t>(m.width) * m.height) {
            throw DimensionError("semantic mask " + std::to_string(m.view_id) + " does not match view " +
                                 std::to_string(views[v].view_id));
        }
    }

    // resolve every label once so unknown labels warn once
    std::map<std::int32_t, bool> crit;
    for (const auto& m : masks) {
        for (std::int32_t l : std::set<std::int32_t>(m.labels.begin(), m.labels.end())) {
            if (!crit.count(l)) crit[l] = criticality(l, table);
        }
    }

    const std::size_t n = scene.gaussian_count();
    std::vector<int> visible(n, 0), hits(n, 0);
    for (std::size_t v = 0; v < views.size(); ++v) {
        const CameraView& cam = views[v];
        const auto world = compose_world(scene, cam.timestamp, lookup);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 pc = cam.to_camera(world[i].mean);
            if (!(pc.z() > kZNear)) continue;
            const auto& in = cam.intrinsics;
            const double u = in.fx * pc.x() / pc.z() + in.cx;
            const double w = in.fy * pc.y() / pc.z() + in.cy;
            if (!(u >= 0.0 && u < in.width && w >= 0.0 && w < in.height)) continue;
            ++visible[i];
            if (crit[majority_label(masks[v], static_cast<int>(u), static_cast<int>(w))]) ++hits[i];
        }
    }

    std::vector<SemanticScore> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].visible_views = visible[i];
        out[i].s_sem = visible[i] > 0 ? static_cast<double>(hits[i]) / visible[i] : 0.0;
        out[i].critical = out[i].s_sem >= 0.5;
    }

    std::size_t base = scene.static_gaussians.size();
    for (const auto& obj : scene.dynamic_objects) {
        const std::size_t m = obj.gaussians.size();
        double sum = 0.0;
        int seen = 0, flagged = 0;
        for (std::size_t k = 0; k < m; ++k) {
            if (out[base + k].visible_views == 0) continue;
            sum += out[base + k].s_sem;
            ++seen;
            flagged += out[base + k].critical ? 1 : 0;
        }
        const double mean = seen > 0 ? sum / seen : 0.0;
        const bool critical = seen > 0 && 2 * flagged >= seen;
        for (std::size_t k = 0; k < m; ++k) {
            out[base + k].s_sem = mean;
            out[base + k].critical = critical;
        }
        base += m;
    }
    return out;
}

void apply_semantic_scores(SceneModel& scene, std::span<const SemanticScore> scores) {
    if (scores.size() != scene.gaussian_count()) throw DimensionError("apply_semantic_scores: count mismatch");
    std::size_t i = 0;
    for (auto& g : scene.static_gaussians) {
        g.s_sem = scores[i].s_sem;
        g.critical = scores[i++].critical;
    }
    for (auto& obj : scene.dynamic_objects) {
        for (auto& dg : obj.gaussians) {
            dg.primitive.s_sem = scores[i].s_sem;
            dg.primitive.critical = scores[i++].critical;
        }
    }
}

}  // namespace pags
