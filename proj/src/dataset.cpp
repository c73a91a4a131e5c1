#include "pags/dataset.hpp"

#include "pags/image.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pags {

namespace fs = std::filesystem;

namespace {

struct ViewLine {
    CameraView view;
    std::string image;
    std::string mask;
};

double number(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t offset) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("view line lacks '" + key + "'", offset);
    double v = 0.0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("bad number '" + s + "' for '" + key + "'", offset);
    }
    return v;
}

int integer(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t offset) {
    const double v = number(kv, key, offset);
    if (v != static_cast<double>(static_cast<long long>(v))) throw ParseError("'" + key + "' must be an integer", offset);
    return static_cast<int>(v);
}

std::vector<ViewLine> parse_lines(const std::string& text) {
    std::vector<ViewLine> out;
    std::size_t offset = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(offset, end - offset);
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::string word;
        if (ls >> word) {
            if (word != "view") throw ParseError("expected 'view'", offset);
            std::map<std::string, std::string> kv;
            std::string tok;
            while (ls >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value, got '" + tok + "'", offset);
                kv[tok.substr(0, eq)] = tok.substr(eq + 1);
            }
            ViewLine v;
            auto& c = v.view;
            c.view_id = integer(kv, "id", offset);
            c.intrinsics.width = integer(kv, "width", offset);
            c.intrinsics.height = integer(kv, "height", offset);
            if (c.intrinsics.width < 1 || c.intrinsics.height < 1) throw ParseError("view size must be positive", offset);
            c.intrinsics.fx = number(kv, "fx", offset);
            c.intrinsics.fy = number(kv, "fy", offset);
            c.intrinsics.cx = number(kv, "cx", offset);
            c.intrinsics.cy = number(kv, "cy", offset);
            c.world_to_camera.rotation =
                Quat(number(kv, "qw", offset), number(kv, "qx", offset), number(kv, "qy", offset),
                     number(kv, "qz", offset));
            c.world_to_camera.translation =
                Vec3(number(kv, "tx", offset), number(kv, "ty", offset), number(kv, "tz", offset));
            c.timestamp = kv.count("time") ? number(kv, "time", offset) : 0.0;
            if (kv.count("image")) v.image = kv["image"];
            if (kv.count("mask")) v.mask = kv["mask"];
            out.push_back(std::move(v));
        }
        offset = end + 1;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<CameraView> parse_views(const std::string& text) {
    std::vector<CameraView> views;
    for (auto& l : parse_lines(text)) views.push_back(std::move(l.view));
    return views;
}

Dataset load_dataset(const std::string& views_path, bool load_images) {
    const auto lines = parse_lines(read_file(views_path));
    const fs::path dir = fs::path(views_path).parent_path();
    Dataset d;
    bool all_masks = !lines.empty();
    for (const auto& l : lines) {
        CameraView v = l.view;
        if (load_images && !l.image.empty()) {
            const RgbImage img = read_png((dir / l.image).string());
            if (img.width != v.width() || img.height != v.height()) {
                throw DimensionError("image " + l.image + " does not match view " + std::to_string(v.view_id));
            }
            v.gt_image = img.data;
        }
        if (!l.mask.empty()) {
            const LabelImage m = read_label_png((dir / l.mask).string());
            if (m.width != v.width() || m.height != v.height()) {
                throw DimensionError("mask " + l.mask + " does not match view " + std::to_string(v.view_id));
            }
            v.semantic_mask = m.labels;
        }
        all_masks = all_masks && v.semantic_mask.has_value();
        d.views.push_back(std::move(v));
    }
    if (all_masks) d.masks = masks_from_views(d.views);
    return d;
}

void save_dataset(const std::string& views_path, const std::vector<CameraView>& views, const std::string& image_dir,
                  const std::string& mask_dir) {
    const fs::path dir = fs::path(views_path).parent_path();
    if (!image_dir.empty()) fs::create_directories(dir / image_dir);
    if (!mask_dir.empty()) fs::create_directories(dir / mask_dir);
    std::ostringstream os;
    os << "# pags-views v1\n";
    for (const auto& v : views) {
        const auto& in = v.intrinsics;
        const auto& q = v.world_to_camera.rotation;
        const auto& t = v.world_to_camera.translation;
        os << "view id=" << v.view_id << " width=" << in.width << " height=" << in.height << " fx=" << fmt(in.fx)
           << " fy=" << fmt(in.fy) << " cx=" << fmt(in.cx) << " cy=" << fmt(in.cy) << " qw=" << fmt(q[0])
           << " qx=" << fmt(q[1]) << " qy=" << fmt(q[2]) << " qz=" << fmt(q[3]) << " tx=" << fmt(t.x())
           << " ty=" << fmt(t.y()) << " tz=" << fmt(t.z()) << " time=" << fmt(v.timestamp);
        const std::string name = "view_" + std::to_string(v.view_id) + ".png";
        if (v.gt_image && !image_dir.empty()) {
            write_png((dir / image_dir / name).string(), in.width, in.height, *v.gt_image);
            os << " image=" << (fs::path(image_dir) / name).generic_string();
        }
        if (v.semantic_mask && !mask_dir.empty()) {
            write_label_png((dir / mask_dir / name).string(), in.width, in.height, *v.semantic_mask);
            os << " mask=" << (fs::path(mask_dir) / name).generic_string();
        }
        os << '\n';
    }
    std::ofstream out(views_path, std::ios::binary);
    if (!out) throw Error("cannot write " + views_path);
    out << os.str();
}

std::vector<SemanticMask> masks_from_views(const std::vector<CameraView>& views) {
    std::vector<SemanticMask> masks;
    for (const auto& v : views) {
        if (!v.semantic_mask) throw ConfigError("view " + std::to_string(v.view_id) + " has no semantic mask");
        masks.push_back({v.view_id, v.width(), v.height(), *v.semantic_mask});
    }
    return masks;
}

}  // namespace pags
