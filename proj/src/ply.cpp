#include "pags/ply.hpp"

#include "pags/quaternion.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace pags {

namespace {

constexpr const char* kMagic = "pags-scene v1";

template <class T>
void put(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(b, sizeof(T));
}

template <class T>
T get(const char* p) {
    char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

enum class Type { I8, U8, I16, U16, I32, U32, F32, F64 };

struct Column {
    std::string name;
    Type type;
};

std::size_t type_size(Type t) {
    switch (t) {
        case Type::I8:
        case Type::U8: return 1;
        case Type::I16:
        case Type::U16: return 2;
        case Type::I32:
        case Type::U32:
        case Type::F32: return 4;
        case Type::F64: return 8;
    }
    return 0;
}

const char* type_name(Type t) {
    switch (t) {
        case Type::I8: return "char";
        case Type::U8: return "uchar";
        case Type::I16: return "short";
        case Type::U16: return "ushort";
        case Type::I32: return "int";
        case Type::U32: return "uint";
        case Type::F32: return "float";
        case Type::F64: return "double";
    }
    return "";
}

bool parse_type(const std::string& s, Type& t) {
    static const std::map<std::string, Type> names{
        {"char", Type::I8},     {"int8", Type::I8},    {"uchar", Type::U8},   {"uint8", Type::U8},
        {"short", Type::I16},   {"int16", Type::I16},  {"ushort", Type::U16}, {"uint16", Type::U16},
        {"int", Type::I32},     {"int32", Type::I32},  {"uint", Type::U32},   {"uint32", Type::U32},
        {"float", Type::F32},   {"float32", Type::F32}, {"double", Type::F64}, {"float64", Type::F64},
    };
    const auto it = names.find(s);
    if (it == names.end()) return false;
    t = it->second;
    return true;
}

void put_value(std::string& out, Type t, double v) {
    switch (t) {
        case Type::I8: put(out, static_cast<std::int8_t>(v)); break;
        case Type::U8: put(out, static_cast<std::uint8_t>(v)); break;
        case Type::I16: put(out, static_cast<std::int16_t>(v)); break;
        case Type::U16: put(out, static_cast<std::uint16_t>(v)); break;
        case Type::I32: put(out, static_cast<std::int32_t>(v)); break;
        case Type::U32: put(out, static_cast<std::uint32_t>(v)); break;
        case Type::F32: put(out, static_cast<float>(v)); break;
        case Type::F64: put(out, v); break;
    }
}

double get_value(const char* p, Type t) {
    switch (t) {
        case Type::I8: return get<std::int8_t>(p);
        case Type::U8: return get<std::uint8_t>(p);
        case Type::I16: return get<std::int16_t>(p);
        case Type::U16: return get<std::uint16_t>(p);
        case Type::I32: return get<std::int32_t>(p);
        case Type::U32: return get<std::uint32_t>(p);
        case Type::F32: return get<float>(p);
        case Type::F64: return get<double>(p);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// column layouts

void add_geometry_columns(std::vector<Column>& c, Type real, int sh_count) {
    for (const char* n : {"x", "y", "z"}) c.push_back({n, real});
    for (int i = 0; i < 3; ++i) c.push_back({"f_dc_" + std::to_string(i), real});
    for (int i = 0; i < 3 * (sh_count - 1); ++i) c.push_back({"f_rest_" + std::to_string(i), real});
    c.push_back({"opacity", real});
    for (int i = 0; i < 3; ++i) c.push_back({"scale_" + std::to_string(i), real});
    for (int i = 0; i < 4; ++i) c.push_back({"rot_" + std::to_string(i), real});
}

void add_semantic_columns(std::vector<Column>& c, Type real) {
    c.push_back({"s_sem", real});
    c.push_back({"critical", Type::U8});
    c.push_back({"id", Type::U32});
}

void push_sh(std::vector<double>& v, const ShBlock& sh) {
    for (int ch = 0; ch < 3; ++ch) v.push_back(sh[0][ch]);
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t k = 1; k < sh.size(); ++k) v.push_back(sh[k][ch]);
}

/// Full block, channel-major: index ch * count + k.
void push_block(std::vector<double>& v, const ShBlock& sh) {
    for (int ch = 0; ch < 3; ++ch)
        for (const auto& c : sh) v.push_back(c[ch]);
}

void push_geometry(std::vector<double>& v, const GaussianPrimitive& g, const ShBlock& sh) {
    for (int i = 0; i < 3; ++i) v.push_back(g.mean[i]);
    push_sh(v, sh);
    v.push_back(g.opacity_logit);
    for (int i = 0; i < 3; ++i) v.push_back(g.log_scale[i]);
    for (int i = 0; i < 4; ++i) v.push_back(g.rotation[i]);
}

void push_semantic(std::vector<double>& v, const GaussianPrimitive& g) {
    if (g.id < 0 || g.id > static_cast<GaussianId>(UINT32_MAX)) {
        throw ConfigError("Gaussian id " + std::to_string(g.id) + " does not fit the PLY id field");
    }
    v.push_back(g.s_sem);
    v.push_back(g.critical ? 1.0 : 0.0);
    v.push_back(static_cast<double>(g.id));
}

void write_element(std::string& header, std::string& body, const std::string& name,
                   const std::vector<Column>& cols, const std::vector<std::vector<double>>& rows) {
    header += "element " + name + " " + std::to_string(rows.size()) + "\n";
    for (const auto& c : cols) header += std::string("property ") + type_name(c.type) + " " + c.name + "\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < cols.size(); ++i) put_value(body, cols[i].type, r[i]);
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// decoding

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Column> columns;
    std::vector<double> data;  // row-major
    std::map<std::string, std::size_t> index;

    bool has(const std::string& n) const { return index.count(n) > 0; }
    double at(std::size_t row, const std::string& n) const { return data[row * columns.size() + index.at(n)]; }
};

struct Header {
    std::vector<Element> elements;
    std::vector<std::string> comments;
    std::size_t body_offset = 0;
};

Header parse_header(const std::string& bytes) {
    Header h;
    std::size_t pos = 0;
    bool first = true, format_seen = false;
    while (true) {
        const std::size_t end = bytes.find('\n', pos);
        if (end == std::string::npos) throw ParseError("PLY header not terminated", pos);
        std::string line = bytes.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (first) {
            if (word != "ply") throw ParseError("not a PLY file", pos);
            first = false;
        } else if (word == "format") {
            std::string f, v;
            ls >> f >> v;
            if (f != "binary_little_endian") throw ParseError("unsupported PLY format '" + f + "'", pos);
            format_seen = true;
        } else if (word == "comment" || word == "obj_info") {
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            h.comments.push_back(rest);
        } else if (word == "element") {
            Element e;
            long long n = -1;
            ls >> e.name >> n;
            if (e.name.empty() || n < 0) throw ParseError("malformed element line", pos);
            e.count = static_cast<std::size_t>(n);
            h.elements.push_back(std::move(e));
        } else if (word == "property") {
            if (h.elements.empty()) throw ParseError("property before any element", pos);
            std::string t, name;
            ls >> t >> name;
            if (t == "list") throw ParseError("list properties are not supported", pos);
            Column c;
            if (!parse_type(t, c.type) || name.empty()) throw ParseError("unknown property type '" + t + "'", pos);
            auto& e = h.elements.back();
            if (e.index.count(name)) throw ParseError("duplicate property '" + name + "'", pos);
            e.index[name] = e.columns.size();
            c.name = name;
            e.columns.push_back(c);
        } else if (word == "end_header") {
            h.body_offset = end + 1;
            break;
        } else if (!word.empty()) {
            throw ParseError("unexpected header keyword '" + word + "'", pos);
        }
        pos = end + 1;
    }
    if (!format_seen) throw ParseError("PLY format line missing", 0);
    return h;
}

void read_body(const std::string& bytes, Header& h) {
    std::size_t pos = h.body_offset;
    for (auto& e : h.elements) {
        std::size_t stride = 0;
        for (const auto& c : e.columns) stride += type_size(c.type);
        e.data.resize(e.count * e.columns.size());
        for (std::size_t r = 0; r < e.count; ++r) {
            if (bytes.size() - pos < stride) {
                throw ParseError("PLY body truncated in element '" + e.name + "' row " + std::to_string(r), pos);
            }
            for (std::size_t c = 0; c < e.columns.size(); ++c) {
                e.data[r * e.columns.size() + c] = get_value(bytes.data() + pos, e.columns[c].type);
                pos += type_size(e.columns[c].type);
            }
        }
    }
}

void require(const Element& e, const std::vector<std::string>& names, std::size_t offset) {
    for (const auto& n : names) {
        if (!e.has(n)) throw ParseError("element '" + e.name + "' lacks required property '" + n + "'", offset);
    }
}

int rest_count(const Element& e) {
    int n = 0;
    while (e.has("f_rest_" + std::to_string(n))) ++n;
    return n;
}

ShBlock read_sh(const Element& e, std::size_t row, int count, const std::string& dc, const std::string& rest,
                std::size_t offset) {
    ShBlock sh(static_cast<std::size_t>(count), Vec3::Zero());
    for (int ch = 0; ch < 3; ++ch) {
        const std::string n = dc + std::to_string(ch);
        if (!e.has(n)) throw ParseError("element '" + e.name + "' lacks property '" + n + "'", offset);
        sh[0][ch] = e.at(row, n);
    }
    for (int ch = 0; ch < 3; ++ch)
        for (int k = 1; k < count; ++k) sh[k][ch] = e.at(row, rest + std::to_string(ch * (count - 1) + k - 1));
    return sh;
}

int sh_count_from_rest(int rest, const Element& e, std::size_t offset) {
    if (rest % 3 != 0) throw ParseError("element '" + e.name + "' has a partial f_rest block", offset);
    const int k = rest / 3 + 1;
    try {
        sh_degree_for_count(static_cast<std::size_t>(k));
    } catch (const Error&) {
        throw ParseError("element '" + e.name + "' has an unsupported SH coefficient count", offset);
    }
    return k;
}

GaussianPrimitive read_primitive(const Element& e, std::size_t row, int sh_count, bool& semantic_missing,
                                 GaussianId& next_id, std::size_t offset) {
    GaussianPrimitive g;
    g.mean = Vec3(e.at(row, "x"), e.at(row, "y"), e.at(row, "z"));
    g.sh = read_sh(e, row, sh_count, "f_dc_", "f_rest_", offset);
    g.opacity_logit = e.at(row, "opacity");
    g.log_scale = Vec3(e.at(row, "scale_0"), e.at(row, "scale_1"), e.at(row, "scale_2"));
    g.rotation = Quat(e.at(row, "rot_0"), e.at(row, "rot_1"), e.at(row, "rot_2"), e.at(row, "rot_3"));
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6) g.rotation = quat::normalized(g.rotation);
    if (e.has("s_sem")) g.s_sem = e.at(row, "s_sem");
    if (e.has("critical")) g.critical = e.at(row, "critical") != 0.0;
    if (!e.has("s_sem") || !e.has("critical")) semantic_missing = true;
    g.id = e.has("id") ? static_cast<GaussianId>(e.at(row, "id")) : next_id++;
    return g;
}

const std::vector<std::string> kGeometry{"x",       "y",       "z",       "opacity", "scale_0", "scale_1",
                                         "scale_2", "rot_0",   "rot_1",   "rot_2",   "rot_3"};

}  // namespace

std::string encode_ply(const SceneModel& scene, PlyPrecision precision) {
    const Type real = precision == PlyPrecision::Double ? Type::F64 : Type::F32;
    std::string header = "ply\nformat binary_little_endian 1.0\n";
    header += std::string("comment ") + kMagic + "\n";
    header += "comment background " + fmt(scene.background_color.x()) + " " + fmt(scene.background_color.y()) +
              " " + fmt(scene.background_color.z()) + "\n";
    std::string body;

    const int sh_count =
        scene.static_gaussians.empty() ? 1 : static_cast<int>(scene.static_gaussians.front().sh.size());
    std::vector<Column> cols;
    add_geometry_columns(cols, real, sh_count);
    add_semantic_columns(cols, real);
    std::vector<std::vector<double>> rows;
    for (const auto& g : scene.static_gaussians) {
        if (static_cast<int>(g.sh.size()) != sh_count) throw ConfigError("static Gaussians mix SH degrees");
        auto& r = rows.emplace_back();
        push_geometry(r, g, g.sh);
        push_semantic(r, g);
    }
    write_element(header, body, "vertex", cols, rows);

    if (!scene.dynamic_objects.empty()) {
        rows.clear();
        for (const auto& o : scene.dynamic_objects) rows.push_back({static_cast<double>(o.object_id)});
        write_element(header, body, "object", {{"object_id", Type::I32}}, rows);

        std::vector<Column> pose_cols{{"object", Type::U32}, {"timestamp", Type::F64}};
        for (int i = 0; i < 4; ++i) pose_cols.push_back({"rot_" + std::to_string(i), Type::F64});
        for (const char* n : {"tx", "ty", "tz"}) pose_cols.push_back({n, Type::F64});
        rows.clear();
        for (std::size_t o = 0; o < scene.dynamic_objects.size(); ++o) {
            for (const auto& p : scene.dynamic_objects[o].poses) {
                rows.push_back({static_cast<double>(o), p.timestamp, p.rotation[0], p.rotation[1], p.rotation[2],
                                p.rotation[3], p.translation.x(), p.translation.y(), p.translation.z()});
            }
        }
        write_element(header, body, "object_pose", pose_cols, rows);

        const DynamicGaussian* first = nullptr;
        for (const auto& o : scene.dynamic_objects)
            if (!o.gaussians.empty() && !first) first = &o.gaussians.front();
        const int count = first ? static_cast<int>(first->appearance.a0.size()) : 1;
        const int order = first ? first->appearance.order : 0;
        std::vector<Column> dcols{{"object", Type::U32}};
        add_geometry_columns(dcols, real, count);
        for (int m = 1; m <= order; ++m) {
            for (int j = 0; j < 3 * count; ++j) dcols.push_back({"cos" + std::to_string(m) + "_" + std::to_string(j), real});
            for (int j = 0; j < 3 * count; ++j) dcols.push_back({"sin" + std::to_string(m) + "_" + std::to_string(j), real});
        }
        dcols.push_back({"period", Type::F64});
        add_semantic_columns(dcols, real);
        rows.clear();
        for (std::size_t o = 0; o < scene.dynamic_objects.size(); ++o) {
            for (const auto& dg : scene.dynamic_objects[o].gaussians) {
                const auto& a = dg.appearance;
                if (static_cast<int>(a.a0.size()) != count || a.order != order) {
                    throw ConfigError("dynamic Gaussians mix SH degrees or Fourier orders");
                }
                auto& r = rows.emplace_back();
                r.push_back(static_cast<double>(o));
                push_geometry(r, dg.primitive, a.a0);
                for (int m = 0; m < order; ++m) {
                    push_block(r, a.cos_coeffs[m]);
                    push_block(r, a.sin_coeffs[m]);
                }
                r.push_back(a.period);
                push_semantic(r, dg.primitive);
            }
        }
        write_element(header, body, "object_vertex", dcols, rows);
    }
    header += "end_header\n";
    return header + body;
}

void save_ply(const SceneModel& scene, const std::string& path, PlyPrecision precision) {
    const std::string bytes = encode_ply(scene, precision);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path);
}

SceneModel decode_ply(const std::string& bytes) {
    Header h = parse_header(bytes);
    read_body(bytes, h);
    const std::size_t off = h.body_offset;

    SceneModel scene;
    for (const auto& c : h.comments) {
        std::istringstream cs(c);
        std::string key;
        cs >> key;
        if (key == "background") {
            double r = 0, g = 0, b = 0;
            if (!(cs >> r >> g >> b)) throw ParseError("malformed background comment", 0);
            scene.background_color = Vec3(r, g, b);
        }
    }

    const Element* vertex = nullptr;
    const Element* objects = nullptr;
    const Element* poses = nullptr;
    const Element* dyn = nullptr;
    for (const auto& e : h.elements) {
        if (e.name == "vertex") vertex = &e;
        else if (e.name == "object") objects = &e;
        else if (e.name == "object_pose") poses = &e;
        else if (e.name == "object_vertex") dyn = &e;
    }
    if (!vertex) throw ParseError("PLY has no vertex element", off);
    require(*vertex, kGeometry, off);

    bool semantic_missing = false;
    GaussianId next_id = 0;
    const int sh_count = sh_count_from_rest(rest_count(*vertex), *vertex, off);
    for (std::size_t r = 0; r < vertex->count; ++r) {
        scene.static_gaussians.push_back(read_primitive(*vertex, r, sh_count, semantic_missing, next_id, off));
    }

    if (objects) {
        require(*objects, {"object_id"}, off);
        for (std::size_t r = 0; r < objects->count; ++r) {
            DynamicObject o;
            o.object_id = static_cast<int>(objects->at(r, "object_id"));
            scene.dynamic_objects.push_back(std::move(o));
        }
        auto object_at = [&](const Element& e, std::size_t r) -> DynamicObject& {
            const auto idx = static_cast<std::size_t>(e.at(r, "object"));
            if (idx >= scene.dynamic_objects.size()) throw ParseError("object index out of range", off);
            return scene.dynamic_objects[idx];
        };
        if (poses) {
            require(*poses, {"object", "timestamp", "rot_0", "rot_1", "rot_2", "rot_3", "tx", "ty", "tz"}, off);
            for (std::size_t r = 0; r < poses->count; ++r) {
                ObjectPose p;
                p.timestamp = poses->at(r, "timestamp");
                p.rotation = Quat(poses->at(r, "rot_0"), poses->at(r, "rot_1"), poses->at(r, "rot_2"),
                                  poses->at(r, "rot_3"));
                p.translation = Vec3(poses->at(r, "tx"), poses->at(r, "ty"), poses->at(r, "tz"));
                object_at(*poses, r).poses.push_back(p);
            }
        }
        if (dyn) {
            require(*dyn, kGeometry, off);
            require(*dyn, {"object", "period"}, off);
            const int count = sh_count_from_rest(rest_count(*dyn), *dyn, off);
            int order = 0;
            while (dyn->has("cos" + std::to_string(order + 1) + "_0")) ++order;
            for (std::size_t r = 0; r < dyn->count; ++r) {
                DynamicGaussian dg;
                dg.primitive = read_primitive(*dyn, r, count, semantic_missing, next_id, off);
                dg.appearance = TimeVaryingSH::zeros(sh_degree_for_count(count), order, dyn->at(r, "period"));
                dg.appearance.a0 = dg.primitive.sh;
                dg.primitive.sh = ShBlock{Vec3::Zero()};
                for (int m = 1; m <= order; ++m) {
                    const std::string c = "cos" + std::to_string(m) + "_", s = "sin" + std::to_string(m) + "_";
                    auto& cb = dg.appearance.cos_coeffs[m - 1];
                    auto& sb = dg.appearance.sin_coeffs[m - 1];
                    for (int ch = 0; ch < 3; ++ch)
                        for (int k = 0; k < count; ++k) {
                            const std::string j = std::to_string(ch * count + k);
                            if (!dyn->has(c + j) || !dyn->has(s + j)) {
                                throw ParseError("object_vertex lacks Fourier coefficient " + j, off);
                            }
                            cb[k][ch] = dyn->at(r, c + j);
                            sb[k][ch] = dyn->at(r, s + j);
                        }
                }
                object_at(*dyn, r).gaussians.push_back(std::move(dg));
            }
        }
    }
    if (semantic_missing) log_warning("PLY lacks s_sem/critical properties; defaulting to 0/false");
    scene.validate();
    return scene;
}

SceneModel load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_ply(ss.str());
}

}  // namespace pags
