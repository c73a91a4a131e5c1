#include "pags/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace pags {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("bad number '" + v + "' for " + key);
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("bad integer '" + v + "' for " + key);
    }
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(to_int(key, item)));
    }
    return out;
}

}  // namespace

bool parse_bool(const std::string& value) {
    std::string l = value;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "on" || l == "true" || l == "1" || l == "yes") return true;
    if (l == "off" || l == "false" || l == "0" || l == "no") return false;
    throw ConfigError("expected on/off, got '" + value + "'");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::size_t offset = 0;
    while (offset < text.size()) {
        std::size_t end = text.find('\n', offset);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(offset, end - offset);
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("expected 'key = value'", offset);
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ParseError("empty key", offset);
            out[key] = trim(line.substr(eq + 1));
        }
        offset = end + 1;
    }
    return out;
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& v) {
    auto& t = train;
    auto& p = priority;
    auto d = [&](double& field) { field = to_double(key, v); };
    auto i = [&](int& field) { field = static_cast<int>(to_int(key, v)); };
    auto b = [&](bool& field) { field = parse_bool(v); };
    auto s = [&](std::string& field) { field = v; };

    if (key == "alpha") d(t.alpha);
    else if (key == "beta") d(t.beta);
    else if (key == "gamma") d(t.gamma);
    else if (key == "schedule_scale") d(t.schedule_scale);
    else if (key == "t_total") i(t.t_total);
    else if (key == "densify_milestones") t.densify_milestones = to_int_list(key, v);
    else if (key == "prune_rate") d(t.prune_rate);
    else if (key == "finetune_start") i(t.finetune_start);
    else if (key == "finetune_interval") i(t.finetune_interval);
    else if (key == "finetune_rate") d(t.finetune_rate);
    else if (key == "densify") b(t.densify);
    else if (key == "densify_grad_threshold") d(t.densify_grad_threshold);
    else if (key == "percent_dense") d(t.percent_dense);
    else if (key == "lr_position") d(t.lr.position);
    else if (key == "lr_position_final") d(t.lr.position_final);
    else if (key == "lr_sh") d(t.lr.sh);
    else if (key == "lr_opacity") d(t.lr.opacity);
    else if (key == "lr_scale") d(t.lr.scale);
    else if (key == "lr_rotation") d(t.lr.rotation);
    else if (key == "lr_pose") d(t.lr.pose);
    else if (key == "ssim_weight") d(t.ssim_weight);
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "alpha_min") {
        d(t.raster.alpha_min);
        p.raster.alpha_min = t.raster.alpha_min;
    } else if (key == "t_stop") {
        d(t.raster.t_stop);
        p.raster.t_stop = t.raster.t_stop;
    } else if (key == "tile_size") {
        i(t.raster.tile_size);
        p.raster.tile_size = t.raster.tile_size;
    } else if (key == "workers") {
        i(t.raster.workers);
        p.raster.workers = t.raster.workers;
    } else if (key == "lookup") {
        PoseLookup l;
        if (v == "nearest") l = PoseLookup::Nearest;
        else if (v == "interpolate") l = PoseLookup::Interpolate;
        else throw ConfigError("lookup must be 'nearest' or 'interpolate'");
        t.lookup = p.lookup = l;
    } else if (key == "sem_threshold") d(p.sem_threshold);
    else if (key == "opacity_threshold") d(p.opacity_threshold);
    else if (key == "alpha_solid") d(p.alpha_solid);
    else if (key == "epsilon") d(p.epsilon);
    else if (key == "per_tile_max_z") b(p.per_tile_max_z);
    else if (key == "SP") b(toggles.sp);
    else if (key == "SD") b(toggles.sd);
    else if (key == "SPR") b(toggles.spr);
    else if (key == "PDR") b(toggles.pdr);
    else if (key == "views") s(views);
    else if (key == "ply_in") s(ply_in);
    else if (key == "ply_out") s(ply_out);
    else if (key == "out_dir") s(out_dir);
    else if (key == "classes") s(classes);
    else if (key == "log") s(log);
    else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) set(k, v);
}

void RunConfig::set_toggle(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("toggle must be NAME=on|off, got '" + assignment + "'");
    const std::string name = assignment.substr(0, eq);
    if (name != "SP" && name != "SD" && name != "SPR" && name != "PDR") {
        throw ConfigError("unknown toggle '" + name + "' (expected SP, SD, SPR or PDR)");
    }
    set(name, assignment.substr(eq + 1));
}

TrainConfig RunConfig::effective_train() const {
    TrainConfig t = train;
    if (toggles.spr) return t;
    if (toggles.sp) {
        t.alpha = 0.0;
    } else {
        t.prune_rate = 0.0;
        t.finetune_rate = 0.0;
    }
    if (toggles.sd) t.beta = 0.0;
    else t.gamma = 0.0;
    return t;
}

}  // namespace pags
