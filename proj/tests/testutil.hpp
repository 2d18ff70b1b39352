#pragma once

// Shared test oracles, independent of the library's intersection path: the
// brute-force nearest hit solves the 3x3 barycentric system per triangle by
// Cramer's rule instead of Moller-Trumbore.

#include <optional>
#include <span>
#include <vector>

#include "advray/bvh.hpp"
#include "advray/core.hpp"
#include "advray/mesh.hpp"

namespace testutil {

using namespace advray;

struct OracleHit {
    double t;
    int mesh_index;
    int tri_index;
    double u, v;
};

// solves M x = b for 3x3 M (columns c0, c1, c2) by Cramer's rule
inline std::optional<Vec3> solve3x3(const Vec3& c0, const Vec3& c1, const Vec3& c2,
                                    const Vec3& b) {
    double det = c0.dot(c1.cross(c2));
    if (std::fabs(det) < 1e-14) return std::nullopt;
    double x = b.dot(c1.cross(c2)) / det;
    double y = c0.dot(b.cross(c2)) / det;
    double z = c0.dot(c1.cross(b)) / det;
    return Vec3{x, y, z};
}

// origin + t dir = p0 + u e1 + v e2  =>  [-dir, e1, e2] (t, u, v)^T = origin - p0
inline std::optional<Vec3> triangle_solve(const Ray& ray, const Point3& p0, const Point3& p1,
                                          const Point3& p2) {
    auto sol = solve3x3(-ray.dir, p1 - p0, p2 - p0, ray.origin - p0);
    if (!sol) return std::nullopt;
    double t = sol->x, u = sol->y, v = sol->z;
    if (u < 0 || v < 0 || u + v > 1) return std::nullopt;
    return Vec3{t, u, v};
}

inline std::optional<OracleHit> brute_force_hit(std::span<const TriMesh> meshes, const Ray& ray,
                                                double t_max) {
    std::optional<OracleHit> best;
    for (size_t m = 0; m < meshes.size(); m++) {
        const TriMesh& mesh = meshes[m];
        for (size_t k = 0; k < mesh.triangles.size(); k++) {
            const Triangle& tri = mesh.triangles[k];
            auto sol = triangle_solve(ray, mesh.positions[tri.v[0]], mesh.positions[tri.v[1]],
                                      mesh.positions[tri.v[2]]);
            if (!sol) continue;
            double t = sol->x;
            if (t <= ray.t_min || t > t_max) continue;
            if (!best || t < best->t) best = OracleHit{t, int(m), int(k), sol->y, sol->z};
        }
    }
    return best;
}

inline TriMesh random_triangle_soup(SplitMix64& rng, int count, double extent = 10.0) {
    TriMesh mesh;
    for (int i = 0; i < count; i++) {
        Point3 base{rng.next_double(-extent, extent), rng.next_double(-extent, extent),
                    rng.next_double(-extent, extent)};
        for (int k = 0; k < 3; k++) {
            mesh.positions.push_back(base + Vec3{rng.next_double(-1, 1), rng.next_double(-1, 1),
                                                 rng.next_double(-1, 1)});
        }
        Triangle t;
        for (int k = 0; k < 3; k++) {
            t.v[k] = 3 * i + k;
            t.vt[k] = -1;
            t.vn[k] = -1;
        }
        mesh.triangles.push_back(t);
    }
    return mesh;
}

inline Ray random_ray(SplitMix64& rng, double extent = 12.0) {
    Point3 origin{rng.next_double(-extent, extent), rng.next_double(-extent, extent),
                  rng.next_double(-extent, extent)};
    Vec3 dir{rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1)};
    while (dir.norm() < 1e-6)
        dir = {rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1)};
    return Ray{origin, dir.normalized(), advray::kRayEpsilon,
               std::numeric_limits<double>::infinity()};
}

}  // namespace testutil
