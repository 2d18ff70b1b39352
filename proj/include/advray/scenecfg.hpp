#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advray/core.hpp"

namespace advray {

// --- Errors ---

enum class ConfigErrorKind { Syntax, UnknownKey, MissingKey, Validation };

struct ConfigError : std::runtime_error {
    ConfigErrorKind kind;
    int line;  // 1-based, 0 when not tied to a source location
    int col;

    ConfigError(ConfigErrorKind kind, const std::string& msg, int line = 0, int col = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ", col " +
                                            std::to_string(col) + ")"
                                      : msg),
          kind(kind),
          line(line),
          col(col) {}
};

// --- Scenario document tree ---
//
// The scenario grammar is a restricted YAML subset: nested maps, block lists
// ("- item"), scalars (int/float/bool/string), 2-space indentation, comments
// with '#', double-quoted strings with \" \\ \n \t escapes, and one level of
// inline lists "[a, b, c]". No anchors, no multi-document streams, no flow
// mappings.

struct ConfigNode {
    enum class Kind { Scalar, Map, List };

    Kind kind = Kind::Map;
    std::string scalar;
    bool quoted = false;
    std::vector<std::pair<std::string, ConfigNode>> entries;  // map, insertion order
    std::vector<ConfigNode> items;                            // list
    int line = 0, col = 0;

    static ConfigNode make_scalar(std::string v, int line = 0, int col = 0, bool quoted = false) {
        ConfigNode n;
        n.kind = Kind::Scalar;
        n.scalar = std::move(v);
        n.quoted = quoted;
        n.line = line;
        n.col = col;
        return n;
    }

    const ConfigNode* find(std::string_view key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    ConfigNode* find(std::string_view key) {
        for (auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace cfgdetail {

struct Line {
    int number;
    int indent;
    std::string text;
    bool item_head;  // line began with "- " (indent counts the dash as one level)
};

inline bool is_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

// Strips a trailing comment; '#' starts a comment at line start or after a
// space, outside quotes.
inline std::string strip_comment(const std::string& s) {
    bool quote = false;
    for (size_t i = 0; i < s.size(); i++) {
        char c = s[i];
        if (c == '"' && (i == 0 || s[i - 1] != '\\')) quote = !quote;
        if (c == '#' && !quote && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t'))
            return s.substr(0, i);
    }
    return s;
}

inline std::string trim(std::string_view s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string_view::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return std::string(s.substr(a, b - a + 1));
}

inline std::vector<Line> lex(const std::string& text) {
    std::vector<Line> lines;
    size_t pos = 0;
    int number = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string raw = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        number++;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();

        size_t i = 0;
        while (i < raw.size() && raw[i] == ' ') i++;
        if (i < raw.size() && raw[i] == '\t')
            throw ConfigError(ConfigErrorKind::Syntax, "tab indentation not allowed", number,
                              int(i) + 1);
        std::string content = trim(strip_comment(raw.substr(i)));
        if (content.empty()) continue;
        int indent = int(i);
        if (indent % 2 != 0)
            throw ConfigError(ConfigErrorKind::Syntax, "indentation must be multiples of 2",
                              number, indent + 1);

        bool item = false;
        if (content == "-" || content.rfind("- ", 0) == 0) {
            item = true;
            content = content == "-" ? "" : trim(content.substr(2));
            if (content.empty())
                throw ConfigError(ConfigErrorKind::Syntax, "empty list item", number, indent + 1);
            if (content.rfind("- ", 0) == 0 || content == "-")
                throw ConfigError(ConfigErrorKind::Syntax, "nested list items not supported",
                                  number, indent + 1);
            indent += 2;  // item content sits one level deeper than the dash
        }
        lines.push_back({number, indent, content, item});
    }
    return lines;
}

// Parses a double-quoted string starting at s[i] == '"'; returns the value
// and advances i past the closing quote.
inline std::string parse_quoted(const std::string& s, size_t& i, int line) {
    std::string out;
    i++;  // opening quote
    while (i < s.size()) {
        char c = s[i];
        if (c == '"') {
            i++;
            return out;
        }
        if (c == '\\') {
            i++;
            if (i >= s.size())
                throw ConfigError(ConfigErrorKind::Syntax, "dangling escape in string", line);
            switch (s[i]) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default:
                    throw ConfigError(ConfigErrorKind::Syntax,
                                      std::string("unknown escape \\") + s[i], line);
            }
            i++;
        } else {
            out += c;
            i++;
        }
    }
    throw ConfigError(ConfigErrorKind::Syntax, "unterminated string", line);
}

inline ConfigNode parse_scalar_text(const std::string& text, int line, int col) {
    if (!text.empty() && text[0] == '"') {
        size_t i = 0;
        std::string val = parse_quoted(text, i, line);
        if (i != text.size())
            throw ConfigError(ConfigErrorKind::Syntax, "trailing characters after string", line);
        return ConfigNode::make_scalar(val, line, col, true);
    }
    return ConfigNode::make_scalar(text, line, col, false);
}

// One level of inline list: [a, b, c]; items are scalars.
inline ConfigNode parse_inline_list(const std::string& text, int line, int col) {
    ConfigNode n;
    n.kind = ConfigNode::Kind::List;
    n.line = line;
    n.col = col;
    size_t i = 1;
    auto skip_ws = [&] { while (i < text.size() && text[i] == ' ') i++; };
    skip_ws();
    if (i < text.size() && text[i] == ']') {
        i++;
    } else {
        while (true) {
            skip_ws();
            if (i >= text.size())
                throw ConfigError(ConfigErrorKind::Syntax, "unterminated inline list", line, col);
            if (text[i] == '[')
                throw ConfigError(ConfigErrorKind::Syntax, "nested inline lists not supported",
                                  line, col + int(i));
            std::string item;
            bool quoted = false;
            if (text[i] == '"') {
                item = parse_quoted(text, i, line);
                quoted = true;
            } else {
                size_t start = i;
                while (i < text.size() && text[i] != ',' && text[i] != ']') i++;
                item = trim(text.substr(start, i - start));
            }
            n.items.push_back(ConfigNode::make_scalar(item, line, col + int(i), quoted));
            skip_ws();
            if (i < text.size() && text[i] == ',') {
                i++;
                continue;
            }
            if (i < text.size() && text[i] == ']') {
                i++;
                break;
            }
            throw ConfigError(ConfigErrorKind::Syntax, "expected ',' or ']' in inline list", line,
                              col + int(i));
        }
    }
    if (trim(text.substr(i)) != "")
        throw ConfigError(ConfigErrorKind::Syntax, "trailing characters after inline list", line);
    return n;
}

class Parser {
public:
    explicit Parser(std::vector<Line> lines) : lines_(std::move(lines)) {}

    ConfigNode parse_document() {
        if (lines_.empty()) {
            ConfigNode n;
            n.kind = ConfigNode::Kind::Map;
            return n;
        }
        if (lines_[0].indent != 0)
            throw ConfigError(ConfigErrorKind::Syntax, "top level must not be indented",
                              lines_[0].number, lines_[0].indent + 1);
        ConfigNode root = parse_block(0);
        if (cur_ < lines_.size())
            throw ConfigError(ConfigErrorKind::Syntax, "unexpected indentation",
                              lines_[cur_].number, lines_[cur_].indent + 1);
        return root;
    }

private:
    ConfigNode parse_block(int indent) {
        const Line& first = lines_[cur_];
        if (first.item_head && first.indent == indent + 2) return parse_list(indent + 2);
        if (first.indent != indent)
            throw ConfigError(ConfigErrorKind::Syntax, "unexpected indentation", first.number,
                              first.indent + 1);
        return parse_map(indent, false);
    }

    ConfigNode parse_list(int item_indent) {
        ConfigNode list;
        list.kind = ConfigNode::Kind::List;
        list.line = lines_[cur_].number;
        while (cur_ < lines_.size() && lines_[cur_].item_head &&
               lines_[cur_].indent == item_indent) {
            const Line& head = lines_[cur_];
            if (head.text.find(": ") != std::string::npos || head.text.back() == ':') {
                list.items.push_back(parse_map(item_indent, true));
            } else {
                ConfigNode item = head.text[0] == '['
                                      ? parse_inline_list(head.text, head.number, head.indent + 1)
                                      : parse_scalar_text(head.text, head.number, head.indent + 1);
                cur_++;
                if (cur_ < lines_.size() && lines_[cur_].indent > item_indent)
                    throw ConfigError(ConfigErrorKind::Syntax, "unexpected indentation",
                                      lines_[cur_].number, lines_[cur_].indent + 1);
                list.items.push_back(std::move(item));
            }
        }
        return list;
    }

    // A map at a fixed indent. When entered at a list item head the first
    // line is the head itself; the map ends at the next item head.
    ConfigNode parse_map(int indent, bool from_item_head) {
        ConfigNode map;
        map.kind = ConfigNode::Kind::Map;
        map.line = lines_[cur_].number;
        bool first = true;
        while (cur_ < lines_.size()) {
            const Line& ln = lines_[cur_];
            if (ln.indent != indent) {
                if (ln.indent > indent)
                    throw ConfigError(ConfigErrorKind::Syntax, "unexpected indentation",
                                      ln.number, ln.indent + 1);
                break;
            }
            if (ln.item_head && !(first && from_item_head)) break;
            first = false;

            auto [key, rest] = split_key(ln);
            if (map.find(key))
                throw ConfigError(ConfigErrorKind::Syntax, "duplicate key '" + key + "'",
                                  ln.number, ln.indent + 1);
            cur_++;
            ConfigNode value;
            if (rest.empty()) {
                if (cur_ >= lines_.size() || lines_[cur_].indent <= indent)
                    throw ConfigError(ConfigErrorKind::Syntax,
                                      "expected nested block after '" + key + ":'", ln.number,
                                      ln.indent + 1);
                if (lines_[cur_].indent != indent + 2 &&
                    !(lines_[cur_].item_head && lines_[cur_].indent == indent + 4))
                    throw ConfigError(ConfigErrorKind::Syntax, "unexpected indentation",
                                      lines_[cur_].number, lines_[cur_].indent + 1);
                value = parse_block(indent + 2);
            } else if (rest[0] == '[') {
                value = parse_inline_list(rest, ln.number, ln.indent + 1);
            } else {
                value = parse_scalar_text(rest, ln.number, ln.indent + 1);
            }
            map.entries.emplace_back(key, std::move(value));
        }
        return map;
    }

    std::pair<std::string, std::string> split_key(const Line& ln) {
        const std::string& s = ln.text;
        std::string key;
        size_t i = 0;
        if (s[0] == '"') {
            key = parse_quoted(s, i, ln.number);
        } else {
            size_t colon = std::string::npos;
            for (size_t j = 0; j < s.size(); j++) {
                if (s[j] == ':' && (j + 1 == s.size() || s[j + 1] == ' ')) {
                    colon = j;
                    break;
                }
            }
            if (colon == std::string::npos)
                throw ConfigError(ConfigErrorKind::Syntax, "expected 'key: value'", ln.number,
                                  ln.indent + 1);
            key = trim(s.substr(0, colon));
            i = colon;
        }
        if (i >= s.size() || s[i] != ':')
            throw ConfigError(ConfigErrorKind::Syntax, "expected ':' after key", ln.number,
                              ln.indent + 1);
        if (key.empty())
            throw ConfigError(ConfigErrorKind::Syntax, "empty key", ln.number, ln.indent + 1);
        return {key, trim(s.substr(i + 1))};
    }

    std::vector<Line> lines_;
    size_t cur_ = 0;
};

}  // namespace cfgdetail

inline ConfigNode parse_config(const std::string& text) {
    return cfgdetail::Parser(cfgdetail::lex(text)).parse_document();
}

// --- Scenario types ---

enum class GeometryKind { Obj, Box, Plane, UvSphere };

struct GeometrySpec {
    GeometryKind kind = GeometryKind::Box;
    std::string obj_path;
    Vec3 box_size{1, 1, 1};
    double plane_extent = 1;
    double sphere_radius = 1;
    int sphere_lat = 16;
    int sphere_lon = 32;
    bool operator==(const GeometrySpec&) const = default;
};

// Albedo texture: either loaded from a .tex file or a constant-initialized
// grid of the given size.
struct TextureRef {
    std::string path;
    Rgb init{0.5, 0.5, 0.5};
    int width = 0, height = 0;
    bool from_file() const { return !path.empty(); }
    bool operator==(const TextureRef&) const = default;
};

enum class MaterialKind { Lambertian, Mirror, Dielectric };

struct MaterialSpec {
    MaterialKind kind = MaterialKind::Lambertian;
    Rgb albedo{0.8, 0.8, 0.8};
    std::optional<TextureRef> texture;
    double ior = 0;  // dielectric only
    bool operator==(const MaterialSpec&) const = default;
};

struct TransformSpec {
    Vec3 translate{0, 0, 0};
    Vec3 rotate_euler_deg{0, 0, 0};
    Vec3 scale{1, 1, 1};
    bool operator==(const TransformSpec&) const = default;
};

struct ObjectSpec {
    std::string name;
    GeometrySpec geometry;
    TransformSpec transform;
    MaterialSpec material;
    bool operator==(const ObjectSpec&) const = default;
};

struct LightSpec {
    Point3 position;
    Rgb intensity;  // radiant intensity; the lambertian 1/pi is folded in here
    bool operator==(const LightSpec&) const = default;
};

struct CameraSpec {
    Point3 eye;
    Point3 look_at;
    Vec3 up{0, 1, 0};
    double fov_deg = 45;  // vertical
    int width = 64;
    int height = 64;
    bool operator==(const CameraSpec&) const = default;
};

struct SceneSpec {
    Rgb background{0, 0, 0};
    CameraSpec camera;
    std::vector<LightSpec> lights;
    std::vector<ObjectSpec> objects;
    bool operator==(const SceneSpec&) const = default;
};

enum class AttackMode { Targeted, Untargeted };
enum class NormKind { L2, Linf };
enum class ViewMode { Single, Orbit };

struct ViewsSpec {
    ViewMode mode = ViewMode::Single;
    int count = 1;
    double radius = 1;
    double elevation_deg = 0;
    Point3 center{0, 0, 0};
    bool operator==(const ViewsSpec&) const = default;
};

struct AttackSpec {
    std::string attackable;  // "<object>.texture"
    AttackMode mode = AttackMode::Targeted;
    int target_class = -1;
    NormKind norm = NormKind::L2;
    double epsilon = 0;
    double alpha = 0;
    int iterations = 1;
    int patience = 5;
    ViewsSpec views;
    uint64_t seed = 0;

    std::string attacked_object() const {
        return attackable.substr(0, attackable.rfind(".texture"));
    }
    bool operator==(const AttackSpec&) const = default;
};

enum class VictimKind { Cnn, Linear };

struct VictimSpec {
    VictimKind kind = VictimKind::Linear;
    std::string weights_path;
    int input_h = 32, input_w = 32;
    std::vector<std::string> classes;
    bool operator==(const VictimSpec&) const = default;
};

struct RenderSpec {
    int max_depth = 4;
    int samples_per_pixel = 1;
    bool shadows = true;
    bool operator==(const RenderSpec&) const = default;
};

struct Scenario {
    SceneSpec scene;
    AttackSpec attack;
    VictimSpec victim;
    RenderSpec render;
    bool operator==(const Scenario&) const = default;
};

// --- Schema readers ---

namespace cfgdetail {

inline long long scalar_as_int(const ConfigNode& n, const std::string& what) {
    if (n.kind != ConfigNode::Kind::Scalar)
        throw ConfigError(ConfigErrorKind::Validation, what + ": expected an integer", n.line);
    long long v = 0;
    auto res = std::from_chars(n.scalar.data(), n.scalar.data() + n.scalar.size(), v);
    if (res.ec != std::errc{} || res.ptr != n.scalar.data() + n.scalar.size())
        throw ConfigError(ConfigErrorKind::Validation,
                          what + ": '" + n.scalar + "' is not an integer", n.line);
    return v;
}

inline uint64_t scalar_as_u64(const ConfigNode& n, const std::string& what) {
    if (n.kind != ConfigNode::Kind::Scalar)
        throw ConfigError(ConfigErrorKind::Validation, what + ": expected an integer", n.line);
    uint64_t v = 0;
    auto res = std::from_chars(n.scalar.data(), n.scalar.data() + n.scalar.size(), v);
    if (res.ec != std::errc{} || res.ptr != n.scalar.data() + n.scalar.size())
        throw ConfigError(ConfigErrorKind::Validation,
                          what + ": '" + n.scalar + "' is not an unsigned integer", n.line);
    return v;
}

inline double scalar_as_double(const ConfigNode& n, const std::string& what) {
    if (n.kind != ConfigNode::Kind::Scalar)
        throw ConfigError(ConfigErrorKind::Validation, what + ": expected a number", n.line);
    const char* s = n.scalar.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end != s + n.scalar.size() || n.scalar.empty())
        throw ConfigError(ConfigErrorKind::Validation, what + ": '" + n.scalar + "' is not a number",
                          n.line);
    return v;
}

inline bool scalar_as_bool(const ConfigNode& n, const std::string& what) {
    if (n.kind == ConfigNode::Kind::Scalar) {
        if (n.scalar == "true") return true;
        if (n.scalar == "false") return false;
    }
    throw ConfigError(ConfigErrorKind::Validation, what + ": expected true or false", n.line);
}

inline std::string scalar_as_string(const ConfigNode& n, const std::string& what) {
    if (n.kind != ConfigNode::Kind::Scalar)
        throw ConfigError(ConfigErrorKind::Validation, what + ": expected a string", n.line);
    return n.scalar;
}

inline Vec3 node_as_vec3(const ConfigNode& n, const std::string& what) {
    if (n.kind != ConfigNode::Kind::List || n.items.size() != 3)
        throw ConfigError(ConfigErrorKind::Validation, what + ": expected [x, y, z]", n.line);
    return {scalar_as_double(n.items[0], what), scalar_as_double(n.items[1], what),
            scalar_as_double(n.items[2], what)};
}

// Tracks consumed keys so leftovers become "unknown key" errors.
class MapReader {
public:
    MapReader(const ConfigNode& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node.kind != ConfigNode::Kind::Map)
            throw ConfigError(ConfigErrorKind::Validation, path_ + ": expected a map", node.line);
    }

    const ConfigNode* optional(const std::string& key) {
        seen_.insert(key);
        return node_.find(key);
    }
    const ConfigNode& required(const std::string& key) {
        const ConfigNode* n = optional(key);
        if (!n)
            throw ConfigError(ConfigErrorKind::MissingKey,
                              path_ + ": missing required key '" + key + "'", node_.line);
        return *n;
    }

    std::string str(const std::string& key) { return scalar_as_string(required(key), at(key)); }
    long long integer(const std::string& key) { return scalar_as_int(required(key), at(key)); }
    double number(const std::string& key) { return scalar_as_double(required(key), at(key)); }
    Vec3 vec3(const std::string& key) { return node_as_vec3(required(key), at(key)); }

    double number_or(const std::string& key, double def) {
        const ConfigNode* n = optional(key);
        return n ? scalar_as_double(*n, at(key)) : def;
    }
    long long integer_or(const std::string& key, long long def) {
        const ConfigNode* n = optional(key);
        return n ? scalar_as_int(*n, at(key)) : def;
    }
    bool boolean_or(const std::string& key, bool def) {
        const ConfigNode* n = optional(key);
        return n ? scalar_as_bool(*n, at(key)) : def;
    }
    Vec3 vec3_or(const std::string& key, Vec3 def) {
        const ConfigNode* n = optional(key);
        return n ? node_as_vec3(*n, at(key)) : def;
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

    // call after reading all schema keys
    void finish() const {
        for (const auto& [k, v] : node_.entries)
            if (!seen_.count(k))
                throw ConfigError(ConfigErrorKind::UnknownKey,
                                  path_ + ": unknown key '" + k + "'", v.line);
    }

    const ConfigNode& node() const { return node_; }

private:
    const ConfigNode& node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void check(bool cond, const std::string& msg, int line = 0) {
    if (!cond) throw ConfigError(ConfigErrorKind::Validation, msg, line);
}

inline void check_rgb_range(const Rgb& c, double lo, double hi, const std::string& what, int line) {
    check(c.finite(), what + ": must be finite", line);
    check(c.min_component() >= lo && c.max_component() <= hi,
          what + ": components must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
          line);
}

}  // namespace cfgdetail

// --- Scenario construction from a document tree ---

inline Scenario scenario_from_node(const ConfigNode& root) {
    using namespace cfgdetail;
    Scenario sc;

    MapReader top(root, "scenario");

    {
        MapReader scene(top.required("scene"), "scene");
        sc.scene.background = scene.vec3_or("background", {0, 0, 0});
        check_rgb_range(sc.scene.background, 0, 1e30, "scene.background", scene.node().line);

        {
            MapReader cam(scene.required("camera"), "scene.camera");
            sc.scene.camera.eye = cam.vec3("eye");
            sc.scene.camera.look_at = cam.vec3("look_at");
            sc.scene.camera.up = cam.vec3_or("up", {0, 1, 0});
            sc.scene.camera.fov_deg = cam.number("fov_deg");
            sc.scene.camera.width = int(cam.integer("width"));
            sc.scene.camera.height = int(cam.integer("height"));
            cam.finish();

            const CameraSpec& c = sc.scene.camera;
            check(c.eye != c.look_at, "scene.camera: eye must differ from look_at",
                  cam.node().line);
            check(c.fov_deg > 0 && c.fov_deg < 180, "scene.camera.fov_deg: must be in (0, 180)",
                  cam.node().line);
            check(c.width >= 1 && c.height >= 1, "scene.camera: width/height must be positive",
                  cam.node().line);
            Vec3 fwd = (c.look_at - c.eye).normalized();
            check(fwd.cross(c.up).norm() > 1e-9,
                  "scene.camera.up: parallel to the viewing direction", cam.node().line);
        }

        if (const ConfigNode* lights = scene.optional("lights")) {
            check(lights->kind == ConfigNode::Kind::List, "scene.lights: expected a list",
                  lights->line);
            for (size_t i = 0; i < lights->items.size(); i++) {
                MapReader lr(lights->items[i], "scene.lights[" + std::to_string(i) + "]");
                std::string kind = lr.str("kind");
                check(kind == "point", lr.at("kind") + ": only 'point' lights are supported",
                      lr.node().line);
                LightSpec light;
                light.position = lr.vec3("position");
                light.intensity = lr.vec3("intensity");
                lr.finish();
                check(light.position.finite(), lr.at("position") + ": must be finite",
                      lr.node().line);
                check_rgb_range(light.intensity, 0, 1e30, lr.at("intensity"), lr.node().line);
                sc.scene.lights.push_back(light);
            }
        }

        const ConfigNode& objects = scene.required("objects");
        check(objects.kind == ConfigNode::Kind::List && !objects.items.empty(),
              "scene.objects: expected a non-empty list", objects.line);
        for (size_t i = 0; i < objects.items.size(); i++) {
            std::string path = "scene.objects[" + std::to_string(i) + "]";
            MapReader obj(objects.items[i], path);
            ObjectSpec o;
            o.name = obj.str("name");
            check(!o.name.empty(), path + ".name: must not be empty", obj.node().line);

            {
                MapReader g(obj.required("geometry"), path + ".geometry");
                std::string kind = g.str("kind");
                if (kind == "obj") {
                    o.geometry.kind = GeometryKind::Obj;
                    o.geometry.obj_path = g.str("path");
                } else if (kind == "box") {
                    o.geometry.kind = GeometryKind::Box;
                    o.geometry.box_size = g.vec3("size");
                    check(o.geometry.box_size.min_component() > 0,
                          path + ".geometry.size: must be positive", g.node().line);
                } else if (kind == "plane") {
                    o.geometry.kind = GeometryKind::Plane;
                    o.geometry.plane_extent = g.number("extent");
                    check(o.geometry.plane_extent > 0, path + ".geometry.extent: must be positive",
                          g.node().line);
                } else if (kind == "uv_sphere") {
                    o.geometry.kind = GeometryKind::UvSphere;
                    o.geometry.sphere_radius = g.number("radius");
                    o.geometry.sphere_lat = int(g.integer("lat"));
                    o.geometry.sphere_lon = int(g.integer("lon"));
                    check(o.geometry.sphere_radius > 0, path + ".geometry.radius: must be positive",
                          g.node().line);
                    check(o.geometry.sphere_lat >= 3 && o.geometry.sphere_lon >= 3,
                          path + ".geometry: sphere tessellation must be >= (3,3)", g.node().line);
                } else {
                    throw ConfigError(ConfigErrorKind::Validation,
                                      path + ".geometry.kind: unknown kind '" + kind + "'",
                                      g.node().line);
                }
                g.finish();
            }

            if (const ConfigNode* tn = obj.optional("transform")) {
                MapReader t(*tn, path + ".transform");
                o.transform.translate = t.vec3_or("translate", {0, 0, 0});
                o.transform.rotate_euler_deg = t.vec3_or("rotate_euler_deg", {0, 0, 0});
                o.transform.scale = t.vec3_or("scale", {1, 1, 1});
                t.finish();
                const Vec3& s = o.transform.scale;
                check(s.x != 0 && s.y != 0 && s.z != 0,
                      path + ".transform.scale: components must be nonzero", tn->line);
            }

            {
                MapReader m(obj.required("material"), path + ".material");
                std::string kind = m.str("kind");
                const ConfigNode* albedo = m.optional("albedo");
                const ConfigNode* texture = m.optional("texture");
                const ConfigNode* ior = m.optional("ior");
                if (kind == "lambertian") {
                    o.material.kind = MaterialKind::Lambertian;
                    check(!(albedo && texture),
                          path + ".material: give either albedo or texture, not both",
                          m.node().line);
                    if (texture) {
                        MapReader tr(*texture, path + ".material.texture");
                        TextureRef ref;
                        const ConfigNode* tp = tr.optional("path");
                        const ConfigNode* ti = tr.optional("init");
                        check(bool(tp) != bool(ti),
                              path + ".material.texture: give exactly one of path or init",
                              texture->line);
                        if (tp) {
                            ref.path = scalar_as_string(*tp, tr.at("path"));
                            check(!tr.optional("width") && !tr.optional("height"),
                                  path +
                                      ".material.texture: width/height come from the file when "
                                      "path is given",
                                  texture->line);
                        } else {
                            ref.init = node_as_vec3(*ti, tr.at("init"));
                            check_rgb_range(ref.init, 0, 1, tr.at("init"), texture->line);
                            ref.width = int(tr.integer("width"));
                            ref.height = int(tr.integer("height"));
                            check(ref.width >= 1 && ref.height >= 1,
                                  path + ".material.texture: width/height must be positive",
                                  texture->line);
                        }
                        tr.finish();
                        o.material.texture = ref;
                    } else if (albedo) {
                        o.material.albedo = node_as_vec3(*albedo, m.at("albedo"));
                        check_rgb_range(o.material.albedo, 0, 1, path + ".material.albedo",
                                        m.node().line);
                    }
                    check(!ior, path + ".material.ior: only valid for dielectric", m.node().line);
                } else if (kind == "mirror" || kind == "dielectric") {
                    o.material.kind =
                        kind == "mirror" ? MaterialKind::Mirror : MaterialKind::Dielectric;
                    check(!texture, path + ".material.texture: only valid for lambertian",
                          m.node().line);
                    check(!albedo, path + ".material.albedo: only valid for lambertian",
                          m.node().line);
                    if (kind == "dielectric") {
                        check(ior != nullptr, path + ".material: dielectric requires ior",
                              m.node().line);
                        o.material.ior = scalar_as_double(*ior, m.at("ior"));
                        check(o.material.ior > 1, path + ".material.ior: must be > 1",
                              m.node().line);
                    } else {
                        check(!ior, path + ".material.ior: only valid for dielectric",
                              m.node().line);
                    }
                } else {
                    throw ConfigError(ConfigErrorKind::Validation,
                                      path + ".material.kind: unknown kind '" + kind + "'",
                                      m.node().line);
                }
                m.finish();
            }

            obj.finish();
            sc.scene.objects.push_back(std::move(o));
        }
        scene.finish();

        std::set<std::string> names;
        for (const auto& o : sc.scene.objects)
            check(names.insert(o.name).second, "scene.objects: duplicate name '" + o.name + "'",
                  objects.line);
    }

    {
        MapReader atk(top.required("attack"), "attack");
        sc.attack.attackable = atk.str("attackable");
        std::string mode = atk.str("mode");
        check(mode == "targeted" || mode == "untargeted",
              "attack.mode: must be targeted or untargeted", atk.node().line);
        sc.attack.mode = mode == "targeted" ? AttackMode::Targeted : AttackMode::Untargeted;

        const ConfigNode* target = atk.optional("target_class");
        if (sc.attack.mode == AttackMode::Targeted) {
            check(target != nullptr, "attack.target_class: required for targeted mode",
                  atk.node().line);
            sc.attack.target_class = int(scalar_as_int(*target, "attack.target_class"));
        } else {
            check(!target, "attack.target_class: only valid for targeted mode", atk.node().line);
        }

        const ConfigNode* norm_n = atk.optional("norm");
        std::string norm = norm_n ? scalar_as_string(*norm_n, "attack.norm") : "l2";
        check(norm == "l2" || norm == "linf", "attack.norm: must be l2 or linf", atk.node().line);
        sc.attack.norm = norm == "l2" ? NormKind::L2 : NormKind::Linf;

        sc.attack.epsilon = atk.number("epsilon");
        sc.attack.alpha = atk.number("alpha");
        sc.attack.iterations = int(atk.integer("iterations"));
        sc.attack.patience = int(atk.integer_or("patience", 5));
        const ConfigNode* seed_n = atk.optional("seed");
        sc.attack.seed = seed_n ? scalar_as_u64(*seed_n, "attack.seed") : 0;

        check(sc.attack.epsilon > 0, "attack.epsilon: must be > 0", atk.node().line);
        check(sc.attack.alpha > 0, "attack.alpha: must be > 0", atk.node().line);
        check(sc.attack.iterations >= 1, "attack.iterations: must be >= 1", atk.node().line);
        check(sc.attack.patience >= 1, "attack.patience: must be >= 1", atk.node().line);

        if (const ConfigNode* views = atk.optional("views")) {
            MapReader v(*views, "attack.views");
            std::string vm = v.str("mode");
            check(vm == "single" || vm == "orbit", "attack.views.mode: must be single or orbit",
                  views->line);
            if (vm == "single") {
                sc.attack.views.mode = ViewMode::Single;
            } else {
                sc.attack.views.mode = ViewMode::Orbit;
                sc.attack.views.count = int(v.integer("count"));
                sc.attack.views.radius = v.number("radius");
                sc.attack.views.elevation_deg = v.number_or("elevation_deg", 0);
                sc.attack.views.center = v.vec3_or("center", {0, 0, 0});
                check(sc.attack.views.count >= 1, "attack.views.count: must be >= 1", views->line);
                check(sc.attack.views.radius > 0, "attack.views.radius: must be > 0", views->line);
                check(sc.attack.views.elevation_deg > -90 && sc.attack.views.elevation_deg < 90,
                      "attack.views.elevation_deg: must be in (-90, 90)", views->line);
            }
            v.finish();
        }
        atk.finish();
    }

    {
        MapReader vic(top.required("victim"), "victim");
        std::string kind = vic.str("kind");
        check(kind == "cnn" || kind == "linear", "victim.kind: must be cnn or linear",
              vic.node().line);
        sc.victim.kind = kind == "cnn" ? VictimKind::Cnn : VictimKind::Linear;
        sc.victim.weights_path = vic.str("weights_path");
        const ConfigNode& isz = vic.required("input_size");
        check(isz.kind == ConfigNode::Kind::List && isz.items.size() == 2,
              "victim.input_size: expected [h, w]", isz.line);
        sc.victim.input_h = int(scalar_as_int(isz.items[0], "victim.input_size.h"));
        sc.victim.input_w = int(scalar_as_int(isz.items[1], "victim.input_size.w"));
        check(sc.victim.input_h >= 8 && sc.victim.input_w >= 8,
              "victim.input_size: must be at least (8, 8)", isz.line);

        const ConfigNode& classes = vic.required("classes");
        check(classes.kind == ConfigNode::Kind::List && !classes.items.empty(),
              "victim.classes: expected a non-empty list", classes.line);
        for (const auto& item : classes.items)
            sc.victim.classes.push_back(scalar_as_string(item, "victim.classes[]"));
        vic.finish();
    }

    if (const ConfigNode* rn = top.optional("render")) {
        MapReader r(*rn, "render");
        sc.render.max_depth = int(r.integer_or("max_depth", 4));
        sc.render.samples_per_pixel = int(r.integer_or("samples_per_pixel", 1));
        sc.render.shadows = r.boolean_or("shadows", true);
        r.finish();
        cfgdetail::check(sc.render.max_depth >= 1, "render.max_depth: must be >= 1", rn->line);
        cfgdetail::check(sc.render.samples_per_pixel >= 1,
                         "render.samples_per_pixel: must be >= 1", rn->line);
    }

    top.finish();

    // cross-field checks
    using cfgdetail::check;
    const std::string& attackable = sc.attack.attackable;
    size_t dot = attackable.rfind(".texture");
    check(dot != std::string::npos && dot + 8 == attackable.size() && dot > 0,
          "attack.attackable: expected \"<object>.texture\"");
    std::string obj_name = sc.attack.attacked_object();
    const ObjectSpec* attacked = nullptr;
    for (const auto& o : sc.scene.objects)
        if (o.name == obj_name) attacked = &o;
    check(attacked != nullptr, "attack.attackable: unknown attackable object '" + obj_name + "'");
    check(attacked->material.kind == MaterialKind::Lambertian && attacked->material.texture,
          "attack.attackable: object '" + obj_name + "' must have a textured lambertian material");

    if (sc.attack.mode == AttackMode::Targeted)
        check(sc.attack.target_class >= 0 && size_t(sc.attack.target_class) <
                                                 sc.victim.classes.size(),
              "attack.target_class: out of range for victim.classes");
    return sc;
}

inline Scenario parse_scenario(const std::string& text) {
    return scenario_from_node(parse_config(text));
}

// --- Canonical serialization ---

namespace cfgdetail {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    return std::string(buf, res.ptr);
}

inline bool scalar_needs_quotes(const std::string& s) {
    if (s.empty()) return true;
    if (s.front() == ' ' || s.back() == ' ' || s.front() == '-' || s.front() == '[' ||
        s.front() == '"')
        return true;
    for (char c : s)
        if (c == ':' || c == '#' || c == ',' || c == ']' || c == '\n' || c == '\t' || c == '"')
            return true;
    return false;
}

inline std::string format_string(const std::string& s) {
    if (!scalar_needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

inline std::string format_vec3(const Vec3& v) {
    return "[" + format_double(v.x) + ", " + format_double(v.y) + ", " + format_double(v.z) + "]";
}

}  // namespace cfgdetail

// Emits the canonical form: fixed schema order, every defaulted field written
// explicitly, floats in shortest round-trip notation. parse(serialize(s)) is
// structurally equal to s and a second serialize is byte-identical.
inline std::string serialize_scenario(const Scenario& sc) {
    using namespace cfgdetail;
    std::string out;
    auto line = [&](int indent, const std::string& text) {
        out.append(size_t(indent), ' ');
        out += text;
        out += '\n';
    };

    line(0, "scene:");
    line(2, "background: " + format_vec3(sc.scene.background));
    line(2, "camera:");
    line(4, "eye: " + format_vec3(sc.scene.camera.eye));
    line(4, "look_at: " + format_vec3(sc.scene.camera.look_at));
    line(4, "up: " + format_vec3(sc.scene.camera.up));
    line(4, "fov_deg: " + format_double(sc.scene.camera.fov_deg));
    line(4, "width: " + std::to_string(sc.scene.camera.width));
    line(4, "height: " + std::to_string(sc.scene.camera.height));
    if (sc.scene.lights.empty()) {
        line(2, "lights: []");
    } else {
        line(2, "lights:");
        for (const auto& l : sc.scene.lights) {
            line(4, "- kind: point");
            line(6, "position: " + format_vec3(l.position));
            line(6, "intensity: " + format_vec3(l.intensity));
        }
    }
    line(2, "objects:");
    for (const auto& o : sc.scene.objects) {
        line(4, "- name: " + format_string(o.name));
        line(6, "geometry:");
        switch (o.geometry.kind) {
            case GeometryKind::Obj:
                line(8, "kind: obj");
                line(8, "path: " + format_string(o.geometry.obj_path));
                break;
            case GeometryKind::Box:
                line(8, "kind: box");
                line(8, "size: " + format_vec3(o.geometry.box_size));
                break;
            case GeometryKind::Plane:
                line(8, "kind: plane");
                line(8, "extent: " + format_double(o.geometry.plane_extent));
                break;
            case GeometryKind::UvSphere:
                line(8, "kind: uv_sphere");
                line(8, "radius: " + format_double(o.geometry.sphere_radius));
                line(8, "lat: " + std::to_string(o.geometry.sphere_lat));
                line(8, "lon: " + std::to_string(o.geometry.sphere_lon));
                break;
        }
        line(6, "transform:");
        line(8, "translate: " + format_vec3(o.transform.translate));
        line(8, "rotate_euler_deg: " + format_vec3(o.transform.rotate_euler_deg));
        line(8, "scale: " + format_vec3(o.transform.scale));
        line(6, "material:");
        switch (o.material.kind) {
            case MaterialKind::Lambertian:
                line(8, "kind: lambertian");
                if (o.material.texture) {
                    const TextureRef& t = *o.material.texture;
                    line(8, "texture:");
                    if (t.from_file()) {
                        line(10, "path: " + format_string(t.path));
                    } else {
                        line(10, "init: " + format_vec3(t.init));
                        line(10, "width: " + std::to_string(t.width));
                        line(10, "height: " + std::to_string(t.height));
                    }
                } else {
                    line(8, "albedo: " + format_vec3(o.material.albedo));
                }
                break;
            case MaterialKind::Mirror:
                line(8, "kind: mirror");
                break;
            case MaterialKind::Dielectric:
                line(8, "kind: dielectric");
                line(8, "ior: " + format_double(o.material.ior));
                break;
        }
    }

    line(0, "attack:");
    line(2, "attackable: " + format_string(sc.attack.attackable));
    line(2, std::string("mode: ") +
                (sc.attack.mode == AttackMode::Targeted ? "targeted" : "untargeted"));
    if (sc.attack.mode == AttackMode::Targeted)
        line(2, "target_class: " + std::to_string(sc.attack.target_class));
    line(2, std::string("norm: ") + (sc.attack.norm == NormKind::L2 ? "l2" : "linf"));
    line(2, "epsilon: " + format_double(sc.attack.epsilon));
    line(2, "alpha: " + format_double(sc.attack.alpha));
    line(2, "iterations: " + std::to_string(sc.attack.iterations));
    line(2, "patience: " + std::to_string(sc.attack.patience));
    line(2, "views:");
    if (sc.attack.views.mode == ViewMode::Single) {
        line(4, "mode: single");
    } else {
        line(4, "mode: orbit");
        line(4, "count: " + std::to_string(sc.attack.views.count));
        line(4, "radius: " + format_double(sc.attack.views.radius));
        line(4, "elevation_deg: " + format_double(sc.attack.views.elevation_deg));
        line(4, "center: " + format_vec3(sc.attack.views.center));
    }
    line(2, "seed: " + std::to_string(sc.attack.seed));

    line(0, "victim:");
    line(2, std::string("kind: ") + (sc.victim.kind == VictimKind::Cnn ? "cnn" : "linear"));
    line(2, "weights_path: " + format_string(sc.victim.weights_path));
    line(2, "input_size: [" + std::to_string(sc.victim.input_h) + ", " +
                std::to_string(sc.victim.input_w) + "]");
    {
        std::string cls = "classes: [";
        for (size_t i = 0; i < sc.victim.classes.size(); i++) {
            if (i) cls += ", ";
            cls += format_string(sc.victim.classes[i]);
        }
        cls += "]";
        line(2, cls);
    }

    line(0, "render:");
    line(2, "max_depth: " + std::to_string(sc.render.max_depth));
    line(2, "samples_per_pixel: " + std::to_string(sc.render.samples_per_pixel));
    line(2, std::string("shadows: ") + (sc.render.shadows ? "true" : "false"));
    return out;
}

// --- Dotted-path overrides ---
//
// "attack.epsilon=4.0" replaces a scalar in the document tree before
// validation; numeric path segments index into lists. Missing map keys are
// created so optional blocks can be introduced from the command line.

inline void apply_override(ConfigNode& root, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(ConfigErrorKind::Syntax,
                          "override must look like path.to.key=value: '" + assignment + "'");
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    std::vector<std::string> segs;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        segs.push_back(path.substr(start, dot == std::string::npos ? std::string::npos
                                                                   : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (const auto& s : segs)
        if (s.empty())
            throw ConfigError(ConfigErrorKind::Syntax, "empty path segment in override '" + path +
                                                           "'");

    ConfigNode* node = &root;
    for (size_t i = 0; i + 1 < segs.size(); i++) {
        const std::string& seg = segs[i];
        if (node->kind == ConfigNode::Kind::List) {
            if (!cfgdetail::is_digits(seg))
                throw ConfigError(ConfigErrorKind::Validation,
                                  "override: expected a list index at '" + seg + "'");
            size_t idx = std::stoul(seg);
            if (idx >= node->items.size())
                throw ConfigError(ConfigErrorKind::Validation,
                                  "override: list index " + seg + " out of range");
            node = &node->items[idx];
        } else if (node->kind == ConfigNode::Kind::Map) {
            ConfigNode* child = node->find(seg);
            if (!child) {
                ConfigNode fresh;
                fresh.kind = ConfigNode::Kind::Map;
                node->entries.emplace_back(seg, fresh);
                child = &node->entries.back().second;
            }
            node = child;
        } else {
            throw ConfigError(ConfigErrorKind::Validation,
                              "override: cannot descend into scalar at '" + seg + "'");
        }
    }

    ConfigNode leaf = value.size() && value[0] == '['
                          ? cfgdetail::parse_inline_list(value, 0, 0)
                          : cfgdetail::parse_scalar_text(value, 0, 0);

    const std::string& last = segs.back();
    if (node->kind == ConfigNode::Kind::List) {
        if (!cfgdetail::is_digits(last))
            throw ConfigError(ConfigErrorKind::Validation,
                              "override: expected a list index at '" + last + "'");
        size_t idx = std::stoul(last);
        if (idx >= node->items.size())
            throw ConfigError(ConfigErrorKind::Validation,
                              "override: list index " + last + " out of range");
        node->items[idx] = std::move(leaf);
    } else if (node->kind == ConfigNode::Kind::Map) {
        if (ConfigNode* child = node->find(last))
            *child = std::move(leaf);
        else
            node->entries.emplace_back(last, std::move(leaf));
    } else {
        throw ConfigError(ConfigErrorKind::Validation,
                          "override: cannot assign below scalar '" + last + "'");
    }
}

// --- View expansion ---
//
// Orbit poses: eye_k = center + (r cos(theta_k) cos(phi), r sin(phi),
// r sin(theta_k) cos(phi)) with phi the elevation and theta_k = 2 pi k / K;
// every orbit camera looks at the center with up (0,1,0). fov and image size
// come from the base camera.

inline std::vector<CameraSpec> expand_views(const AttackSpec& attack, const CameraSpec& base) {
    const ViewsSpec& v = attack.views;
    if (v.mode == ViewMode::Single) return {base};
    if (v.count < 1) throw ConfigError(ConfigErrorKind::Validation, "views.count: must be >= 1");
    if (v.radius <= 0) throw ConfigError(ConfigErrorKind::Validation, "views.radius: must be > 0");

    double phi = deg_to_rad(v.elevation_deg);
    std::vector<CameraSpec> cams;
    cams.reserve(v.count);
    for (int k = 0; k < v.count; k++) {
        double theta = 2 * kPi * k / v.count;
        CameraSpec cam = base;
        cam.eye = v.center + Vec3{v.radius * std::cos(theta) * std::cos(phi),
                                  v.radius * std::sin(phi),
                                  v.radius * std::sin(theta) * std::cos(phi)};
        cam.look_at = v.center;
        cam.up = {0, 1, 0};
        cams.push_back(cam);
    }
    return cams;
}

}  // namespace advray
