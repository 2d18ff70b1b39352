#include <catch2/catch_amalgamated.hpp>

#include "advray/scenecfg.hpp"

using namespace advray;

namespace {

// a small street scene: camera on a textured mailbox box, targeted attack
const char* kStreetDoc = R"(scene:
  background: [0.2, 0.25, 0.3]
  camera:
    eye: [0, 1.5, 4]
    look_at: [0, 0.5, 0]
    up: [0, 1, 0]
    fov_deg: 60
    width: 64
    height: 64
  lights:
    - kind: point
      position: [2, 4, 3]
      intensity: [30, 30, 30]
  objects:
    - name: mailbox
      geometry:
        kind: box
        size: [0.6, 1.0, 0.5]
      transform:
        translate: [0, 0.5, 0]
      material:
        kind: lambertian
        texture:
          init: [0.3, 0.35, 0.6]
          width: 32
          height: 32
    - name: ground
      geometry:
        kind: plane
        extent: 10
      material:
        kind: lambertian
        albedo: [0.4, 0.4, 0.4]
attack:
  attackable: mailbox.texture
  mode: targeted
  target_class: 0
  norm: l2
  epsilon: 8
  alpha: 0.5
  iterations: 100
  views:
    mode: orbit
    count: 4
    radius: 4
    elevation_deg: 20
    center: [0, 0.5, 0]
  seed: 7
victim:
  kind: cnn
  weights_path: weights/tiny_cnn.avw
  input_size: [32, 32]
  classes: [stop sign, mailbox, street]
render:
  max_depth: 4
  samples_per_pixel: 1
  shadows: true
)";

const char* kMinimalDoc = R"(scene:
  camera:
    eye: [0, 0, 3]
    look_at: [0, 0, 0]
    fov_deg: 45
    width: 16
    height: 16
  lights:
    - kind: point
      position: [0, 2, 2]
      intensity: [4, 4, 4]
  objects:
    - name: cube
      geometry:
        kind: box
        size: [1, 1, 1]
      material:
        kind: lambertian
        texture:
          init: [0.5, 0.5, 0.5]
          width: 8
          height: 8
attack:
  attackable: cube.texture
  mode: untargeted
  epsilon: 2
  alpha: 0.1
  iterations: 10
victim:
  kind: linear
  weights_path: w.avw
  input_size: [16, 16]
  classes: [a, b]
)";

}  // namespace

TEST_CASE("street scenario parses with attack fields", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    REQUIRE(sc.scene.objects.size() == 2);
    CHECK(sc.scene.objects[0].name == "mailbox");
    CHECK(sc.attack.attackable == "mailbox.texture");
    CHECK(sc.attack.attacked_object() == "mailbox");
    CHECK(sc.attack.mode == AttackMode::Targeted);
    CHECK(sc.attack.target_class == 0);
    CHECK(sc.victim.classes[sc.attack.target_class] == "stop sign");
    CHECK(sc.attack.norm == NormKind::L2);
    CHECK(sc.attack.views.mode == ViewMode::Orbit);
    CHECK(sc.attack.views.count == 4);
    CHECK(sc.scene.objects[0].material.texture.has_value());
    CHECK(sc.scene.objects[0].material.texture->width == 32);
    CHECK(sc.render.shadows);
}

TEST_CASE("minimal scenario gets documented defaults", "[scenecfg]") {
    Scenario sc = parse_scenario(kMinimalDoc);
    CHECK(sc.render.max_depth == 4);
    CHECK(sc.render.samples_per_pixel == 1);
    CHECK(sc.render.shadows == true);
    CHECK(sc.attack.views.mode == ViewMode::Single);
    CHECK(sc.attack.patience == 5);
    CHECK(sc.attack.norm == NormKind::L2);
    CHECK(sc.attack.seed == 0);
    CHECK(sc.scene.background == Rgb{0, 0, 0});
    CHECK(sc.scene.camera.up == Vec3{0, 1, 0});
    CHECK(sc.scene.objects[0].transform == TransformSpec{});
}

TEST_CASE("attackable must name an existing object", "[scenecfg]") {
    std::string doc = kMinimalDoc;
    auto pos = doc.find("cube.texture");
    doc.replace(pos, 12, "nope.texture");
    try {
        parse_scenario(doc);
        FAIL("expected validation error");
    } catch (const ConfigError& e) {
        CHECK(e.kind == ConfigErrorKind::Validation);
        CHECK(std::string(e.what()).find("unknown attackable object") != std::string::npos);
    }
}

TEST_CASE("error kinds are distinguishable", "[scenecfg]") {
    SECTION("syntax error reports line and column") {
        try {
            parse_scenario("scene:\n\tcamera: 1\n");
            FAIL("expected syntax error");
        } catch (const ConfigError& e) {
            CHECK(e.kind == ConfigErrorKind::Syntax);
            CHECK(e.line == 2);
            CHECK(e.col >= 1);
        }
    }
    SECTION("unknown key") {
        std::string doc = kMinimalDoc;
        doc += "render:\n  wat: 1\n";
        try {
            parse_scenario(doc);
            FAIL("expected unknown key error");
        } catch (const ConfigError& e) {
            CHECK(e.kind == ConfigErrorKind::UnknownKey);
            CHECK(std::string(e.what()).find("wat") != std::string::npos);
        }
    }
    SECTION("missing key") {
        std::string doc = kMinimalDoc;
        auto pos = doc.find("  epsilon: 2\n");
        doc.erase(pos, 13);
        try {
            parse_scenario(doc);
            FAIL("expected missing key error");
        } catch (const ConfigError& e) {
            CHECK(e.kind == ConfigErrorKind::MissingKey);
            CHECK(std::string(e.what()).find("epsilon") != std::string::npos);
        }
    }
    SECTION("range validation") {
        std::string doc = kMinimalDoc;
        auto pos = doc.find("epsilon: 2");
        doc.replace(pos, 10, "epsilon: -1");
        try {
            parse_scenario(doc);
            FAIL("expected validation error");
        } catch (const ConfigError& e) {
            CHECK(e.kind == ConfigErrorKind::Validation);
        }
    }
    SECTION("duplicate key is a syntax error") {
        CHECK_THROWS_AS(parse_config("a: 1\na: 2\n"), ConfigError);
    }
}

TEST_CASE("serialize round-trips structurally", "[scenecfg]") {
    for (const char* doc : {kStreetDoc, kMinimalDoc}) {
        Scenario sc = parse_scenario(doc);
        std::string canonical = serialize_scenario(sc);
        Scenario again = parse_scenario(canonical);
        CHECK(again == sc);
    }
}

TEST_CASE("floats serialize in shortest round-trip form", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    std::string canonical = serialize_scenario(sc);
    CHECK(canonical.find("epsilon: 8\n") != std::string::npos);
    Scenario again = parse_scenario(canonical);
    CHECK(again.attack.epsilon == 8.0);

    sc.attack.epsilon = 0.1;  // not exactly representable; shortest form must round-trip
    again = parse_scenario(serialize_scenario(sc));
    CHECK(again.attack.epsilon == 0.1);
}

TEST_CASE("unicode names serialize idempotently", "[scenecfg]") {
    Scenario sc = parse_scenario(kMinimalDoc);
    sc.scene.objects[0].name = "mesa\xc3\xa9";  // non-ascii bytes pass through
    sc.attack.attackable = sc.scene.objects[0].name + ".texture";
    std::string once = serialize_scenario(sc);
    std::string twice = serialize_scenario(parse_scenario(once));
    CHECK(once == twice);
}

TEST_CASE("quoted strings and escapes survive round-trips", "[scenecfg]") {
    Scenario sc = parse_scenario(kMinimalDoc);
    sc.victim.classes = {"stop sign", "a:b", "weird\"quote", "tab\there"};
    Scenario again = parse_scenario(serialize_scenario(sc));
    CHECK(again.victim.classes == sc.victim.classes);
}

TEST_CASE("expand_views quarter circle", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    sc.attack.views = {ViewMode::Orbit, 4, 2.0, 0.0, {0, 0, 0}};
    auto cams = expand_views(sc.attack, sc.scene.camera);
    REQUIRE(cams.size() == 4);
    const Vec3 expected[4] = {{2, 0, 0}, {0, 0, 2}, {-2, 0, 0}, {0, 0, -2}};
    for (int k = 0; k < 4; k++) {
        CHECK((cams[k].eye - expected[k]).norm() < 1e-12);
        CHECK(cams[k].look_at == Point3{0, 0, 0});
        CHECK(cams[k].up == Vec3{0, 1, 0});
        CHECK(cams[k].width == sc.scene.camera.width);
        CHECK(cams[k].fov_deg == sc.scene.camera.fov_deg);
    }
}

TEST_CASE("expand_views single orbit camera", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    sc.attack.views = {ViewMode::Orbit, 1, 3.0, 30.0, {1, 2, 3}};
    auto cams = expand_views(sc.attack, sc.scene.camera);
    REQUIRE(cams.size() == 1);
    double phi = deg_to_rad(30);
    Vec3 expected = Vec3{1, 2, 3} + Vec3{3 * std::cos(phi), 3 * std::sin(phi), 0};
    CHECK((cams[0].eye - expected).norm() < 1e-12);
}

TEST_CASE("expand_views radius and elevation hold for all k", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    sc.attack.views = {ViewMode::Orbit, 8, 3.0, 30.0, {0, 1, 0}};
    auto cams = expand_views(sc.attack, sc.scene.camera);
    REQUIRE(cams.size() == 8);
    for (const auto& cam : cams) {
        CHECK((cam.eye - Point3{0, 1, 0}).norm() == Catch::Approx(3.0).epsilon(1e-9));
        CHECK(cam.eye.y == Catch::Approx(1 + 3 * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("expand_views mode single returns the base camera", "[scenecfg]") {
    Scenario sc = parse_scenario(kMinimalDoc);
    auto cams = expand_views(sc.attack, sc.scene.camera);
    REQUIRE(cams.size() == 1);
    CHECK(cams[0] == sc.scene.camera);
}

TEST_CASE("orbit |eye - center| = radius for random parameters", "[scenecfg]") {
    Scenario sc = parse_scenario(kStreetDoc);
    SplitMix64 rng(99);
    for (int trial = 0; trial < 50; trial++) {
        ViewsSpec v;
        v.mode = ViewMode::Orbit;
        v.count = 1 + int(rng.next_below(12));
        v.radius = rng.next_double(0.1, 20.0);
        v.elevation_deg = rng.next_double(-89.0, 89.0);
        v.center = {rng.next_double(-5, 5), rng.next_double(-5, 5), rng.next_double(-5, 5)};
        sc.attack.views = v;
        for (const auto& cam : expand_views(sc.attack, sc.scene.camera)) {
            double r = (cam.eye - v.center).norm();
            CHECK(std::fabs(r - v.radius) / v.radius < 1e-9);
        }
    }
}

TEST_CASE("overrides replace scalars and report unknown keys", "[scenecfg]") {
    ConfigNode node = parse_config(kStreetDoc);
    apply_override(node, "attack.views.count=8");
    apply_override(node, "attack.epsilon=4.0");
    apply_override(node, "scene.objects.0.material.texture.width=16");
    Scenario sc = scenario_from_node(node);
    CHECK(sc.attack.views.count == 8);
    CHECK(sc.attack.epsilon == 4.0);
    CHECK(sc.scene.objects[0].material.texture->width == 16);

    apply_override(node, "attack.nope=1");
    try {
        scenario_from_node(node);
        FAIL("expected unknown key error");
    } catch (const ConfigError& e) {
        CHECK(e.kind == ConfigErrorKind::UnknownKey);
    }
}

TEST_CASE("overrides can introduce optional blocks", "[scenecfg]") {
    ConfigNode node = parse_config(kMinimalDoc);
    apply_override(node, "render.samples_per_pixel=4");
    apply_override(node, "attack.views.mode=orbit");
    apply_override(node, "attack.views.count=2");
    apply_override(node, "attack.views.radius=3.5");
    Scenario sc = scenario_from_node(node);
    CHECK(sc.render.samples_per_pixel == 4);
    CHECK(sc.attack.views.mode == ViewMode::Orbit);
    CHECK(sc.attack.views.count == 2);
}

TEST_CASE("parsing is total on mutated documents", "[scenecfg]") {
    // fuzz-ish: random byte edits either parse or raise ConfigError, never crash
    std::string base = kStreetDoc;
    SplitMix64 rng(1234);
    int parsed = 0, rejected = 0;
    for (int trial = 0; trial < 500; trial++) {
        std::string doc = base;
        int edits = 1 + int(rng.next_below(8));
        for (int e = 0; e < edits; e++) {
            size_t pos = rng.next_below(doc.size());
            switch (rng.next_below(3)) {
                case 0: doc[pos] = char(rng.next_below(256)); break;
                case 1: doc.insert(pos, 1, char(32 + rng.next_below(95))); break;
                case 2: doc.erase(pos, 1); break;
            }
        }
        try {
            parse_scenario(doc);
            parsed++;
        } catch (const ConfigError&) {
            rejected++;
        } catch (const std::exception& ex) {
            FAIL(std::string("non-config exception: ") + ex.what());
        }
    }
    CHECK(parsed + rejected == 500);
    CHECK(rejected > 0);
}

TEST_CASE("inline list edge cases", "[scenecfg]") {
    ConfigNode n = parse_config("empty: []\nvals: [1, 2, 3]\nnames: [\"a, b\", c]\n");
    CHECK(n.find("empty")->items.empty());
    CHECK(n.find("vals")->items.size() == 3);
    REQUIRE(n.find("names")->items.size() == 2);
    CHECK(n.find("names")->items[0].scalar == "a, b");
    CHECK_THROWS_AS(parse_config("bad: [1, [2]]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("bad: [1, 2\n"), ConfigError);
}
