#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advray/bvh.hpp"
#include "advray/io.hpp"
#include "advray/mesh.hpp"
#include "advray/scenecfg.hpp"

namespace advray {

struct SceneError : std::runtime_error {
    explicit SceneError(const std::string& what) : std::runtime_error(what) {}
};

struct CompiledMaterial {
    MaterialKind kind = MaterialKind::Lambertian;
    Rgb albedo{0.8, 0.8, 0.8};
    Texture texture;  // non-empty iff textured lambertian
    double ior = 0;
    bool textured() const { return texture.pixel_count() > 0; }
};

struct CompiledObject {
    std::string name;
    CompiledMaterial material;
};

// A scenario compiled for rendering: world-space meshes (transforms baked),
// one BVH over everything, and the attacked object's starting texture.
// Immutable after build; the current attacked texture is passed separately
// into each render call so views and attack iterations can share the scene.
struct Scene {
    Rgb background;
    std::vector<LightSpec> lights;
    std::vector<TriMesh> meshes;  // index == object_id
    std::vector<CompiledObject> objects;
    Bvh bvh;
    int attacked_id = -1;
    Texture initial_texture;

    Scene() = default;
    Scene(const Scene&) = delete;  // bvh holds a span into meshes
    Scene& operator=(const Scene&) = delete;
    Scene(Scene&&) = delete;
    Scene& operator=(Scene&&) = delete;
};

// Relative asset paths (obj files, .tex textures, victim weights) resolve
// against the scenario file's directory.
inline std::filesystem::path resolve_asset(const std::filesystem::path& base_dir,
                                           const std::string& path) {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

inline void build_scene(const Scenario& sc, const std::filesystem::path& base_dir, Scene& out) {
    out.background = sc.scene.background;
    out.lights = sc.scene.lights;
    std::string attacked_name = sc.attack.attacked_object();

    for (size_t i = 0; i < sc.scene.objects.size(); i++) {
        const ObjectSpec& spec = sc.scene.objects[i];
        TriMesh mesh;
        switch (spec.geometry.kind) {
            case GeometryKind::Obj:
                mesh = load_obj(read_text_file(resolve_asset(base_dir, spec.geometry.obj_path)));
                break;
            case GeometryKind::Box:
                mesh = make_box(spec.geometry.box_size);
                break;
            case GeometryKind::Plane:
                mesh = make_plane(spec.geometry.plane_extent);
                break;
            case GeometryKind::UvSphere:
                mesh = make_uv_sphere(spec.geometry.sphere_radius, spec.geometry.sphere_lat,
                                      spec.geometry.sphere_lon);
                break;
        }
        if (mesh.triangles.empty())
            throw SceneError("object '" + spec.name + "': no triangles");
        mesh = transform_mesh(std::move(mesh),
                              Transform::trs(spec.transform.translate,
                                             spec.transform.rotate_euler_deg,
                                             spec.transform.scale));
        mesh.object_id = int(i);

        CompiledObject obj;
        obj.name = spec.name;
        obj.material.kind = spec.material.kind;
        obj.material.albedo = spec.material.albedo;
        obj.material.ior = spec.material.ior;
        if (spec.material.texture) {
            const TextureRef& ref = *spec.material.texture;
            if (ref.from_file()) {
                obj.material.texture =
                    read_texture_raw(read_file(resolve_asset(base_dir, ref.path)));
            } else {
                obj.material.texture = Texture(ref.width, ref.height, ref.init);
            }
            if (!mesh.has_uvs_everywhere())
                throw SceneError("object '" + spec.name +
                                 "': textured material requires uvs on every triangle");
        }

        if (spec.name == attacked_name) {
            out.attacked_id = int(i);
            out.initial_texture = obj.material.texture;
            for (double v : out.initial_texture.data)
                if (v < 0 || v > 1 || !std::isfinite(v))
                    throw SceneError("attacked texture values must lie in [0, 1]");
        }

        out.meshes.push_back(std::move(mesh));
        out.objects.push_back(std::move(obj));
    }

    ADVRAY_CHECK(out.attacked_id >= 0, "build_scene: attacked object missing after validation");
    out.bvh = Bvh::build(out.meshes);
}

}  // namespace advray
