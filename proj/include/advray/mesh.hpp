#pragma once

#include <charconv>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "advray/core.hpp"

namespace advray {

struct MeshError : std::runtime_error {
    explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

// Indexed triangle with separate index triples per attribute (OBJ style).
// uv/normal indices are -1 when the attribute is absent.
struct Triangle {
    int v[3];
    int vt[3];
    int vn[3];
};

struct Uv {
    double u = 0, v = 0;
    bool operator==(const Uv&) const = default;
};

struct TriMesh {
    std::vector<Point3> positions;
    std::vector<Vec3> normals;  // optional vertex normals
    std::vector<Uv> uvs;        // optional texture coordinates
    std::vector<Triangle> triangles;
    int object_id = -1;

    bool has_uvs_everywhere() const {
        if (triangles.empty()) return false;
        for (const auto& t : triangles)
            if (t.vt[0] < 0 || t.vt[1] < 0 || t.vt[2] < 0) return false;
        return true;
    }
};

// --- Wavefront OBJ subset ---
//
// Supports v, vt, vn and f with 1-based indices in the forms
// v, v/vt, v//vn, v/vt/vn. Faces with more than 3 vertices are
// fan-triangulated as (0, i, i+1). mtllib/usemtl are ignored (materials come
// from the scenario file); any warning text is appended to *warnings.

namespace detail {

inline double parse_obj_number(std::string_view tok, int line_no, const char* what) {
    double v;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw MeshError("obj line " + std::to_string(line_no) + ": non-numeric " + what + " '" +
                        std::string(tok) + "'");
    return v;
}

inline int parse_obj_index(std::string_view tok, int line_no, size_t limit, const char* what) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw MeshError("obj line " + std::to_string(line_no) + ": malformed " + what +
                        " index '" + std::string(tok) + "'");
    if (v <= 0)
        throw MeshError("obj line " + std::to_string(line_no) + ": non-positive " + what +
                        " index " + std::to_string(v));
    if (size_t(v) > limit)
        throw MeshError("obj line " + std::to_string(line_no) + ": " + what + " index " +
                        std::to_string(v) + " out of range (have " + std::to_string(limit) + ")");
    return v - 1;
}

}  // namespace detail

inline TriMesh load_obj(const std::string& text, std::string* warnings = nullptr) {
    TriMesh mesh;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool warned_mtl = false;

    while (std::getline(in, line)) {
        line_no++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;

        if (tag == "v" || tag == "vn") {
            std::string xs, ys, zs;
            if (!(ls >> xs >> ys >> zs))
                throw MeshError("obj line " + std::to_string(line_no) + ": expected 3 coordinates");
            Vec3 p{detail::parse_obj_number(xs, line_no, "coordinate"),
                   detail::parse_obj_number(ys, line_no, "coordinate"),
                   detail::parse_obj_number(zs, line_no, "coordinate")};
            if (tag == "v") mesh.positions.push_back(p);
            else mesh.normals.push_back(p);
        } else if (tag == "vt") {
            std::string us, vs;
            if (!(ls >> us >> vs))
                throw MeshError("obj line " + std::to_string(line_no) + ": expected 2 coordinates");
            mesh.uvs.push_back({detail::parse_obj_number(us, line_no, "texcoord"),
                                detail::parse_obj_number(vs, line_no, "texcoord")});
        } else if (tag == "f") {
            struct Corner { int v, vt, vn; };
            std::vector<Corner> corners;
            std::string tok;
            while (ls >> tok) {
                std::string_view sv(tok);
                size_t s1 = sv.find('/');
                Corner c{-1, -1, -1};
                if (s1 == std::string_view::npos) {
                    c.v = detail::parse_obj_index(sv, line_no, mesh.positions.size(), "vertex");
                } else {
                    c.v = detail::parse_obj_index(sv.substr(0, s1), line_no,
                                                  mesh.positions.size(), "vertex");
                    std::string_view rest = sv.substr(s1 + 1);
                    size_t s2 = rest.find('/');
                    if (s2 == std::string_view::npos) {  // v/vt
                        c.vt = detail::parse_obj_index(rest, line_no, mesh.uvs.size(), "texcoord");
                    } else {
                        std::string_view vt = rest.substr(0, s2);
                        std::string_view vn = rest.substr(s2 + 1);
                        if (!vt.empty())  // v/vt/vn, else v//vn
                            c.vt = detail::parse_obj_index(vt, line_no, mesh.uvs.size(), "texcoord");
                        if (vn.empty())
                            throw MeshError("obj line " + std::to_string(line_no) +
                                            ": malformed face token '" + tok + "'");
                        c.vn = detail::parse_obj_index(vn, line_no, mesh.normals.size(), "normal");
                    }
                }
                corners.push_back(c);
            }
            if (corners.size() < 3)
                throw MeshError("obj line " + std::to_string(line_no) +
                                ": face needs at least 3 vertices");
            for (size_t i = 1; i + 1 < corners.size(); i++) {
                Triangle t;
                const Corner* c[3] = {&corners[0], &corners[i], &corners[i + 1]};
                for (int k = 0; k < 3; k++) {
                    t.v[k] = c[k]->v;
                    t.vt[k] = c[k]->vt;
                    t.vn[k] = c[k]->vn;
                }
                mesh.triangles.push_back(t);
            }
        } else if (tag == "mtllib" || tag == "usemtl") {
            if (warnings && !warned_mtl) {
                *warnings += "obj: material statements ignored\n";
                warned_mtl = true;
            }
        }
        // other directives (o, g, s, ...) carry no geometry; skipped
    }
    return mesh;
}

// --- Procedural primitives ---

namespace detail {
inline void require_positive(double v, const char* what) {
    if (!(v > 0)) throw MeshError(std::string(what) + " must be positive");
}
}  // namespace detail

// Axis-aligned box centered at the origin, 24 vertices / 12 triangles.
// Every face is unwrapped to the full [0,1]^2 uv square.
inline TriMesh make_box(Vec3 size) {
    detail::require_positive(size.x, "box size.x");
    detail::require_positive(size.y, "box size.y");
    detail::require_positive(size.z, "box size.z");
    Vec3 h = size * 0.5;

    TriMesh mesh;
    // per face: normal axis, two in-plane axes (u, v), sign
    struct Face { Vec3 n, u, v; };
    const Face faces[6] = {
        {{1, 0, 0}, {0, 0, -1}, {0, 1, 0}},   // +x
        {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}},   // -x
        {{0, 1, 0}, {1, 0, 0}, {0, 0, -1}},   // +y
        {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}},   // -y
        {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},    // +z
        {{0, 0, -1}, {-1, 0, 0}, {0, 1, 0}},  // -z
    };
    for (const Face& f : faces) {
        int base = int(mesh.positions.size());
        Vec3 center = {f.n.x * h.x, f.n.y * h.y, f.n.z * h.z};
        Vec3 du = {f.u.x * h.x, f.u.y * h.y, f.u.z * h.z};
        Vec3 dv = {f.v.x * h.x, f.v.y * h.y, f.v.z * h.z};
        const double uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int k = 0; k < 4; k++) {
            double su = uv[k][0] * 2 - 1, sv = uv[k][1] * 2 - 1;
            mesh.positions.push_back(center + du * su + dv * sv);
            mesh.normals.push_back(f.n);
            mesh.uvs.push_back({uv[k][0], uv[k][1]});
        }
        for (int k = 1; k + 1 < 4; k++) {
            Triangle t;
            int idx[3] = {base, base + k, base + k + 1};
            for (int j = 0; j < 3; j++) { t.v[j] = idx[j]; t.vt[j] = idx[j]; t.vn[j] = idx[j]; }
            mesh.triangles.push_back(t);
        }
    }
    return mesh;
}

// Square in the xz plane with edge length `extent`, normal +y, corners at
// (+-extent/2, 0, +-extent/2), uv spanning [0,1]^2 with u along +x and v
// along +z.
inline TriMesh make_plane(double extent) {
    detail::require_positive(extent, "plane extent");
    TriMesh mesh;
    double half = extent * 0.5;
    const double sgn[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    for (int k = 0; k < 4; k++) {
        mesh.positions.push_back({sgn[k][0] * half, 0, sgn[k][1] * half});
        mesh.normals.push_back({0, 1, 0});
        mesh.uvs.push_back({(sgn[k][0] + 1) * 0.5, (sgn[k][1] + 1) * 0.5});
    }
    for (int k = 1; k + 1 < 4; k++) {
        Triangle t;
        int idx[3] = {0, k, k + 1};
        for (int j = 0; j < 3; j++) { t.v[j] = idx[j]; t.vt[j] = idx[j]; t.vn[j] = idx[j]; }
        mesh.triangles.push_back(t);
    }
    return mesh;
}

// Latitude/longitude sphere with equirectangular uvs and smooth normals.
// Poles are triangle fans, so the count is 2*n_lat*n_lon - 2*n_lon triangles.
inline TriMesh make_uv_sphere(double radius, int n_lat, int n_lon) {
    detail::require_positive(radius, "sphere radius");
    if (n_lat < 3 || n_lon < 3) throw MeshError("sphere tessellation must be >= (3,3)");

    TriMesh mesh;
    // (n_lat+1) x (n_lon+1) grid; the seam column is duplicated for uv continuity
    for (int i = 0; i <= n_lat; i++) {
        double theta = kPi * i / n_lat;  // from +y pole
        double st = std::sin(theta), ct = std::cos(theta);
        for (int j = 0; j <= n_lon; j++) {
            double phi = 2 * kPi * j / n_lon;
            Vec3 n{st * std::cos(phi), ct, st * std::sin(phi)};
            mesh.positions.push_back(n * radius);
            mesh.normals.push_back(n);
            mesh.uvs.push_back({double(j) / n_lon, double(i) / n_lat});
        }
    }
    auto at = [&](int i, int j) { return i * (n_lon + 1) + j; };
    auto emit = [&](int a, int b, int c) {
        Triangle t;
        int idx[3] = {a, b, c};
        for (int k = 0; k < 3; k++) { t.v[k] = idx[k]; t.vt[k] = idx[k]; t.vn[k] = idx[k]; }
        mesh.triangles.push_back(t);
    };
    for (int i = 0; i < n_lat; i++) {
        for (int j = 0; j < n_lon; j++) {
            // band quad: a/d on ring i, b/c on ring i+1
            int a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            if (i < n_lat - 1) emit(a, b, c);  // degenerate at the bottom pole (b == c)
            if (i > 0) emit(a, c, d);          // degenerate at the top pole (a == d)
        }
    }
    return mesh;
}

// Bakes an affine transform into a mesh: positions by the matrix, normals by
// the inverse transpose (re-normalized).
inline TriMesh transform_mesh(TriMesh mesh, const Transform& xf) {
    for (auto& p : mesh.positions) p = xf.apply_point(p);
    for (auto& n : mesh.normals) n = xf.apply_normal(n);
    return mesh;
}

}  // namespace advray
