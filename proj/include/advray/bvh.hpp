#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "advray/core.hpp"
#include "advray/mesh.hpp"

namespace advray {

// Secondary rays start at this offset to avoid re-hitting their origin surface.
constexpr double kRayEpsilon = 1e-4;

struct Ray {
    Point3 origin;
    Vec3 dir;  // unit length
    double t_min = kRayEpsilon;
    double t_max = std::numeric_limits<double>::infinity();
};

struct HitRecord {
    double t = 0;
    Point3 point;
    Vec3 normal;  // unit shading normal, flipped to oppose the incident ray
    Uv uv;
    int object_id = -1;
    int tri_id = -1;
    bool front_face = true;  // incident ray arrived against the geometric normal
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void grow(const Point3& p) { lo = vmin(lo, p); hi = vmax(hi, p); }
    void grow(const Aabb& b) { lo = vmin(lo, b.lo); hi = vmax(hi, b.hi); }
    Vec3 extent() const { return hi - lo; }
    int longest_axis() const {
        Vec3 e = extent();
        if (e.x >= e.y && e.x >= e.z) return 0;
        return e.y >= e.z ? 1 : 2;
    }
    bool contains(const Aabb& b) const {
        return b.lo.x >= lo.x && b.lo.y >= lo.y && b.lo.z >= lo.z && b.hi.x <= hi.x &&
               b.hi.y <= hi.y && b.hi.z <= hi.z;
    }
    // slab test against [t_min, t_max]
    bool hit(const Ray& r, double t_max) const {
        double t0 = r.t_min, t1 = t_max;
        for (int a = 0; a < 3; a++) {
            double inv = 1.0 / r.dir[a];
            double near = (lo[a] - r.origin[a]) * inv;
            double far = (hi[a] - r.origin[a]) * inv;
            if (inv < 0) std::swap(near, far);
            t0 = near > t0 ? near : t0;
            t1 = far < t1 ? far : t1;
            if (t1 < t0) return false;
        }
        return true;
    }
};

// Möller–Trumbore. On hit fills t and the barycentric pair (u along p1, v
// along p2); t must land in (t_min, t_max].
inline bool intersect_triangle(const Ray& r, const Point3& p0, const Point3& p1, const Point3& p2,
                               double t_max, double& t, double& u, double& v) {
    Vec3 e1 = p1 - p0;
    Vec3 e2 = p2 - p0;
    Vec3 pvec = r.dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::fabs(det) < 1e-16) return false;  // parallel
    double inv_det = 1.0 / det;
    Vec3 tvec = r.origin - p0;
    u = tvec.dot(pvec) * inv_det;
    if (u < 0 || u > 1) return false;
    Vec3 qvec = tvec.cross(e1);
    v = r.dir.dot(qvec) * inv_det;
    if (v < 0 || u + v > 1) return false;
    t = e2.dot(qvec) * inv_det;
    return t > r.t_min && t <= t_max;
}

// Binary BVH over the triangles of several meshes. Median split on the
// centroid along the longest axis, leaves hold <= 4 triangles. Construction
// sorts by (centroid, triangle order) so the tree is deterministic for a
// fixed mesh list. Immutable after build; traversal is thread-safe.
class Bvh {
public:
    static constexpr int kLeafSize = 4;

    struct Node {
        Aabb box;
        int left = -1, right = -1;  // internal children
        int first = 0, count = 0;   // leaf triangle range (count > 0 => leaf)
        bool is_leaf() const { return count > 0; }
    };

    struct TriRef {
        int object_id;
        int tri_id;
    };

    Bvh() = default;

    static Bvh build(std::span<const TriMesh> meshes) {
        Bvh bvh;
        bvh.meshes_ = meshes;
        struct BuildRef {
            TriRef ref;
            Aabb box;
            Vec3 centroid;
            int order;
        };
        std::vector<BuildRef> refs;
        for (size_t m = 0; m < meshes.size(); m++) {
            const TriMesh& mesh = meshes[m];
            for (size_t t = 0; t < mesh.triangles.size(); t++) {
                const Triangle& tri = mesh.triangles[t];
                Aabb box;
                for (int k = 0; k < 3; k++) box.grow(mesh.positions[tri.v[k]]);
                refs.push_back({{int(m), int(t)},
                                box,
                                (box.lo + box.hi) * 0.5,
                                int(refs.size())});
            }
        }
        if (refs.empty()) throw MeshError("bvh: no triangles in scene");

        bvh.nodes_.reserve(refs.size() * 2);
        bvh.build_node(refs, 0, int(refs.size()));
        bvh.refs_.reserve(refs.size());
        for (const auto& r : refs) bvh.refs_.push_back(r.ref);
        return bvh;
    }

    // Nearest hit in (t_min, t_max], with barycentric-interpolated uv and
    // shading normal (vertex normals when present, else geometric), flipped
    // to oppose the ray. Returns nullopt on miss.
    std::optional<HitRecord> intersect(const Ray& ray) const {
        double best_t = ray.t_max;
        int best_ref = -1;
        double best_u = 0, best_v = 0;

        int stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!node.box.hit(ray, best_t)) continue;
            if (node.is_leaf()) {
                for (int i = node.first; i < node.first + node.count; i++) {
                    const TriRef& ref = refs_[i];
                    const TriMesh& mesh = meshes_[ref.object_id];
                    const Triangle& tri = mesh.triangles[ref.tri_id];
                    double t, u, v;
                    if (intersect_triangle(ray, mesh.positions[tri.v[0]],
                                           mesh.positions[tri.v[1]], mesh.positions[tri.v[2]],
                                           best_t, t, u, v)) {
                        best_t = t;
                        best_ref = i;
                        best_u = u;
                        best_v = v;
                    }
                }
            } else {
                stack[sp++] = node.left;
                stack[sp++] = node.right;
            }
        }
        if (best_ref < 0) return std::nullopt;
        return make_hit(ray, refs_[best_ref], best_t, best_u, best_v);
    }

    // True iff anything lies strictly inside (t_min, t_max). Early exit.
    bool intersect_any(const Ray& ray, double t_max) const {
        int stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!node.box.hit(ray, t_max)) continue;
            if (node.is_leaf()) {
                for (int i = node.first; i < node.first + node.count; i++) {
                    const TriRef& ref = refs_[i];
                    const TriMesh& mesh = meshes_[ref.object_id];
                    const Triangle& tri = mesh.triangles[ref.tri_id];
                    double t, u, v;
                    if (intersect_triangle(ray, mesh.positions[tri.v[0]],
                                           mesh.positions[tri.v[1]], mesh.positions[tri.v[2]],
                                           std::numeric_limits<double>::infinity(), t, u, v) &&
                        t < t_max)
                        return true;
                }
            } else {
                stack[sp++] = node.left;
                stack[sp++] = node.right;
            }
        }
        return false;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<TriRef>& refs() const { return refs_; }
    std::span<const TriMesh> meshes() const { return meshes_; }

private:
    template <typename BuildRef>
    int build_node(std::vector<BuildRef>& refs, int first, int count) {
        Aabb box;
        for (int i = first; i < first + count; i++) box.grow(refs[i].box);
        int index = int(nodes_.size());
        nodes_.push_back({});
        nodes_[index].box = box;
        if (count <= kLeafSize) {
            nodes_[index].first = first;
            nodes_[index].count = count;
            return index;
        }
        int axis = box.longest_axis();
        std::sort(refs.begin() + first, refs.begin() + first + count,
                  [axis](const BuildRef& a, const BuildRef& b) {
                      if (a.centroid[axis] != b.centroid[axis])
                          return a.centroid[axis] < b.centroid[axis];
                      return a.order < b.order;
                  });
        int half = count / 2;
        int left = build_node(refs, first, half);
        int right = build_node(refs, first + half, count - half);
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    HitRecord make_hit(const Ray& ray, const TriRef& ref, double t, double u, double v) const {
        const TriMesh& mesh = meshes_[ref.object_id];
        const Triangle& tri = mesh.triangles[ref.tri_id];
        HitRecord hit;
        hit.t = t;
        hit.point = ray.origin + ray.dir * t;
        hit.object_id = mesh.object_id >= 0 ? mesh.object_id : ref.object_id;
        hit.tri_id = ref.tri_id;

        double w = 1 - u - v;
        if (tri.vt[0] >= 0 && tri.vt[1] >= 0 && tri.vt[2] >= 0) {
            const Uv& a = mesh.uvs[tri.vt[0]];
            const Uv& b = mesh.uvs[tri.vt[1]];
            const Uv& c = mesh.uvs[tri.vt[2]];
            hit.uv = {w * a.u + u * b.u + v * c.u, w * a.v + u * b.v + v * c.v};
        }

        Vec3 geom_n = (mesh.positions[tri.v[1]] - mesh.positions[tri.v[0]])
                          .cross(mesh.positions[tri.v[2]] - mesh.positions[tri.v[0]])
                          .normalized();
        hit.front_face = ray.dir.dot(geom_n) < 0;

        Vec3 n = geom_n;
        if (tri.vn[0] >= 0 && tri.vn[1] >= 0 && tri.vn[2] >= 0) {
            n = (mesh.normals[tri.vn[0]] * w + mesh.normals[tri.vn[1]] * u +
                 mesh.normals[tri.vn[2]] * v)
                    .normalized();
        }
        // orient the shading normal against the incident direction
        if (ray.dir.dot(n) > 0) n = -n;
        hit.normal = n;
        return hit;
    }

    std::vector<Node> nodes_;
    std::vector<TriRef> refs_;
    std::span<const TriMesh> meshes_;
};

inline Bvh build_bvh(std::span<const TriMesh> meshes) { return Bvh::build(meshes); }

}  // namespace advray
