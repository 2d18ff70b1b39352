#include <catch2/catch_amalgamated.hpp>

#include "advray/bvh.hpp"
#include "advray/mesh.hpp"
#include "testutil.hpp"

using namespace advray;

TEST_CASE("obj quad with uvs", "[geom]") {
    const char* obj = R"(v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3
f 1/1 3/3 4/4
)";
    TriMesh mesh = load_obj(obj);
    REQUIRE(mesh.positions.size() == 4);
    REQUIRE(mesh.triangles.size() == 2);
    double umin = 1, umax = 0, vmin = 1, vmax = 0;
    for (const auto& uv : mesh.uvs) {
        umin = std::min(umin, uv.u); umax = std::max(umax, uv.u);
        vmin = std::min(vmin, uv.v); vmax = std::max(vmax, uv.v);
    }
    CHECK(umin == 0); CHECK(umax == 1);
    CHECK(vmin == 0); CHECK(vmax == 1);
    CHECK(mesh.has_uvs_everywhere());
}

TEST_CASE("obj quad face fan-triangulates", "[geom]") {
    TriMesh mesh = load_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    REQUIRE(mesh.triangles.size() == 2);
    CHECK(mesh.triangles[0].v[0] == 0);
    CHECK(mesh.triangles[0].v[1] == 1);
    CHECK(mesh.triangles[0].v[2] == 2);
    CHECK(mesh.triangles[1].v[0] == 0);
    CHECK(mesh.triangles[1].v[1] == 2);
    CHECK(mesh.triangles[1].v[2] == 3);
}

TEST_CASE("obj index and token errors", "[geom]") {
    CHECK_THROWS_AS(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), MeshError);
    CHECK_THROWS_AS(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 0\n"), MeshError);
    CHECK_THROWS_AS(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 -1\n"), MeshError);
    CHECK_THROWS_AS(load_obj("v 0 0 zero\n"), MeshError);
    CHECK_THROWS_AS(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n"), MeshError);
    CHECK_THROWS_AS(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n"), MeshError);
}

TEST_CASE("obj face forms and mtl warning", "[geom]") {
    const char* obj = R"(mtllib foo.mtl
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
vn 0 0 1
usemtl bar
f 1/1/1 2/2/1 3/3/1
f 1//1 2//1 3//1
f 1/1 2/2 3/3
f 1 2 3
)";
    std::string warnings;
    TriMesh mesh = load_obj(obj, &warnings);
    REQUIRE(mesh.triangles.size() == 4);
    CHECK(mesh.triangles[0].vt[0] == 0);
    CHECK(mesh.triangles[0].vn[0] == 0);
    CHECK(mesh.triangles[1].vt[0] == -1);
    CHECK(mesh.triangles[1].vn[0] == 0);
    CHECK(mesh.triangles[2].vn[0] == -1);
    CHECK(mesh.triangles[3].vt[0] == -1);
    CHECK(warnings.find("material") != std::string::npos);
}

TEST_CASE("box primitive", "[geom]") {
    TriMesh box = make_box({1, 1, 1});
    CHECK(box.positions.size() == 24);
    CHECK(box.triangles.size() == 12);
    for (const auto& p : box.positions) {
        CHECK(std::fabs(std::fabs(p.x) - 0.5) < 1e-12);
        CHECK(std::fabs(std::fabs(p.y) - 0.5) < 1e-12);
        CHECK(std::fabs(std::fabs(p.z) - 0.5) < 1e-12);
    }
    CHECK(box.has_uvs_everywhere());
    CHECK_THROWS_AS(make_box({0, 1, 1}), MeshError);
}

TEST_CASE("plane primitive", "[geom]") {
    TriMesh plane = make_plane(2);
    REQUIRE(plane.positions.size() == 4);
    CHECK(plane.triangles.size() == 2);
    for (const auto& p : plane.positions) {
        CHECK(std::fabs(std::fabs(p.x) - 1.0) < 1e-12);
        CHECK(p.y == 0);
        CHECK(std::fabs(std::fabs(p.z) - 1.0) < 1e-12);
    }
    for (const auto& n : plane.normals) CHECK(n == Vec3{0, 1, 0});
}

TEST_CASE("uv sphere vertices on the sphere", "[geom]") {
    TriMesh sphere = make_uv_sphere(1.0, 8, 16);
    CHECK(sphere.triangles.size() == 2 * 8 * 16 - 2 * 16);
    for (const auto& p : sphere.positions) CHECK(std::fabs(p.norm() - 1.0) < 1e-9);
    CHECK(sphere.has_uvs_everywhere());
    CHECK_THROWS_AS(make_uv_sphere(1.0, 2, 16), MeshError);
}

TEST_CASE("transform invertibility", "[geom]") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 100; trial++) {
        Vec3 t{rng.next_double(-5, 5), rng.next_double(-5, 5), rng.next_double(-5, 5)};
        Vec3 r{rng.next_double(-180, 180), rng.next_double(-180, 180), rng.next_double(-180, 180)};
        Vec3 s{rng.next_double(0.2, 3), rng.next_double(0.2, 3), rng.next_double(0.2, 3)};
        Transform xf = Transform::trs(t, r, s);
        Point3 p{rng.next_double(-2, 2), rng.next_double(-2, 2), rng.next_double(-2, 2)};
        Point3 back = xf.inv.apply_point(xf.fwd.apply_point(p));
        CHECK((back - p).norm() < 1e-9);
        // matrix * inverse = identity
        Mat4 ident = xf.fwd * xf.inv;
        for (int i = 0; i < 4; i++)
            for (int j = 0; j < 4; j++)
                CHECK(std::fabs(ident.m[i][j] - (i == j ? 1.0 : 0.0)) < 1e-9);
    }
}

TEST_CASE("single triangle gives a single leaf", "[geom]") {
    std::vector<TriMesh> meshes;
    meshes.push_back(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"));
    Bvh bvh = Bvh::build(meshes);
    REQUIRE(bvh.nodes().size() == 1);
    CHECK(bvh.nodes()[0].is_leaf());
    CHECK(bvh.nodes()[0].count == 1);
}

TEST_CASE("axis-aligned triangle hit", "[geom]") {
    std::vector<TriMesh> meshes;
    meshes.push_back(load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"));
    Bvh bvh = Bvh::build(meshes);

    Ray ray{{0.25, 0.25, -1}, {0, 0, 1}, 1e-4, std::numeric_limits<double>::infinity()};
    auto hit = bvh.intersect(ray);
    REQUIRE(hit.has_value());
    CHECK(hit->t == Catch::Approx(1.0).margin(1e-12));
    CHECK((hit->point - Point3{0.25, 0.25, 0}).norm() < 1e-12);
    // shading normal opposes the ray
    CHECK(hit->normal.dot(ray.dir) < 0);

    Ray parallel{{0.25, 0.25, -1}, {1, 0, 0}, 1e-4, std::numeric_limits<double>::infinity()};
    CHECK_FALSE(bvh.intersect(parallel).has_value());
}

TEST_CASE("intersect agrees with the linear-system oracle", "[geom]") {
    SplitMix64 rng(42);
    std::vector<TriMesh> meshes;
    meshes.push_back(testutil::random_triangle_soup(rng, 1, 2.0));
    for (int trial = 0; trial < 10000; trial++) {
        Ray ray = testutil::random_ray(rng, 4.0);
        const TriMesh& mesh = meshes[0];
        const Triangle& tri = mesh.triangles[0];
        auto oracle = testutil::triangle_solve(ray, mesh.positions[tri.v[0]],
                                               mesh.positions[tri.v[1]], mesh.positions[tri.v[2]]);
        bool oracle_hit = oracle.has_value() && oracle->x > ray.t_min;
        double t, u, v;
        bool mt_hit = intersect_triangle(ray, mesh.positions[tri.v[0]], mesh.positions[tri.v[1]],
                                         mesh.positions[tri.v[2]],
                                         std::numeric_limits<double>::infinity(), t, u, v);
        REQUIRE(mt_hit == oracle_hit);
        if (mt_hit) CHECK(std::fabs(t - oracle->x) < 1e-9);
    }
}

TEST_CASE("bvh equals brute force on a random scene", "[geom]") {
    SplitMix64 rng(7);
    std::vector<TriMesh> meshes;
    meshes.push_back(testutil::random_triangle_soup(rng, 600));
    meshes.push_back(testutil::random_triangle_soup(rng, 400));
    Bvh bvh = Bvh::build(meshes);

    int hits = 0;
    for (int trial = 0; trial < 1000; trial++) {
        Ray ray = testutil::random_ray(rng);
        auto fast = bvh.intersect(ray);
        auto slow = testutil::brute_force_hit(meshes, ray,
                                              std::numeric_limits<double>::infinity());
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            hits++;
            CHECK(std::fabs(fast->t - slow->t) < 1e-9);
            CHECK(fast->object_id == slow->mesh_index);
            CHECK(fast->tri_id == slow->tri_index);
        }
    }
    CHECK(hits > 100);  // the scene is dense enough for the test to mean something
}

TEST_CASE("separated clusters produce disjoint root children", "[geom]") {
    SplitMix64 rng(11);
    TriMesh left = testutil::random_triangle_soup(rng, 50, 3.0);
    TriMesh right = testutil::random_triangle_soup(rng, 50, 3.0);
    for (auto& p : left.positions) p.x -= 20;
    for (auto& p : right.positions) p.x += 20;
    std::vector<TriMesh> meshes{left, right};
    Bvh bvh = Bvh::build(meshes);

    const auto& root = bvh.nodes()[0];
    REQUIRE_FALSE(root.is_leaf());
    const auto& a = bvh.nodes()[root.left].box;
    const auto& b = bvh.nodes()[root.right].box;
    bool disjoint_x = a.hi.x < b.lo.x || b.hi.x < a.lo.x;
    CHECK(disjoint_x);
    CHECK(bvh.nodes()[root.left].box.lo.x >= -30);
}

TEST_CASE("leaf boxes contain their triangles", "[geom]") {
    SplitMix64 rng(13);
    std::vector<TriMesh> meshes;
    meshes.push_back(testutil::random_triangle_soup(rng, 300));
    Bvh bvh = Bvh::build(meshes);
    for (const auto& node : bvh.nodes()) {
        if (!node.is_leaf()) continue;
        CHECK(node.count <= Bvh::kLeafSize);
        for (int i = node.first; i < node.first + node.count; i++) {
            const auto& ref = bvh.refs()[i];
            const TriMesh& mesh = meshes[ref.object_id];
            Aabb tri_box;
            for (int k = 0; k < 3; k++)
                tri_box.grow(mesh.positions[mesh.triangles[ref.tri_id].v[k]]);
            CHECK(node.box.contains(tri_box));
        }
    }
}

TEST_CASE("intersect_any shadows and agreement", "[geom]") {
    // occluder quad between origin area and a light at z = 2
    std::vector<TriMesh> meshes;
    meshes.push_back(load_obj("v -1 -1 1\nv 1 -1 1\nv 1 1 1\nv -1 1 1\nf 1 2 3 4\n"));
    Bvh bvh = Bvh::build(meshes);

    Ray toward{{0, 0, 0}, {0, 0, 1}, 1e-4, std::numeric_limits<double>::infinity()};
    CHECK(bvh.intersect_any(toward, 2.0));
    Ray away{{0, 0, 0}, {0, 0, -1}, 1e-4, std::numeric_limits<double>::infinity()};
    CHECK_FALSE(bvh.intersect_any(away, 2.0));
    // strictly-inside check: a hit exactly at t_max does not count
    CHECK_FALSE(bvh.intersect_any(toward, 1.0));

    SplitMix64 rng(17);
    std::vector<TriMesh> soup;
    soup.push_back(testutil::random_triangle_soup(rng, 500));
    Bvh soup_bvh = Bvh::build(soup);
    for (int trial = 0; trial < 10000; trial++) {
        Ray ray = testutil::random_ray(rng);
        double t_max = rng.next_double(0.5, 30.0);
        auto hit = soup_bvh.intersect(ray);
        bool expected = hit.has_value() && hit->t < t_max;
        CHECK(soup_bvh.intersect_any(ray, t_max) == expected);
    }
}

TEST_CASE("box interior rays cross exactly two faces", "[geom]") {
    std::vector<TriMesh> meshes{make_box({1, 1, 1})};
    const TriMesh& box = meshes[0];
    SplitMix64 rng(23);
    int checked = 0;
    for (int trial = 0; trial < 2000 && checked < 500; trial++) {
        Point3 inside{rng.next_double(-0.45, 0.45), rng.next_double(-0.45, 0.45),
                      rng.next_double(-0.45, 0.45)};
        Point3 outside{rng.next_double(-4, 4), rng.next_double(-4, 4), rng.next_double(-4, 4)};
        if (outside.norm() < 1.5) continue;
        Vec3 dir = (inside - outside).normalized();
        Ray ray{outside, dir, 0.0, std::numeric_limits<double>::infinity()};

        // count all crossings, skipping samples that graze triangle edges
        int count = 0;
        bool near_edge = false;
        for (const auto& tri : box.triangles) {
            auto sol = testutil::triangle_solve(ray, box.positions[tri.v[0]],
                                                box.positions[tri.v[1]], box.positions[tri.v[2]]);
            if (!sol) continue;
            if (sol->x <= 0) continue;
            double u = sol->y, v = sol->z, w = 1 - u - v;
            double margin = std::min({u, v, w});
            if (margin < 1e-9) near_edge = true;
            count++;
        }
        if (near_edge) continue;
        checked++;
        CHECK(count == 2);
    }
    CHECK(checked >= 500);
}
