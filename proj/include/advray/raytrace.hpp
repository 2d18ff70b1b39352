#pragma once

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

#include "advray/diff.hpp"
#include "advray/image.hpp"
#include "advray/scene.hpp"
#include "advray/scenecfg.hpp"

namespace advray {

// Worker count: ADVRAY_THREADS caps it, 0 or unset means hardware concurrency.
inline int resolved_thread_count() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("ADVRAY_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return hw;
}

// Right-handed pinhole camera. forward = normalize(look_at - eye), right =
// normalize(forward x up), true_up = right x forward; the image plane sits at
// distance 1 with half-height tan(fov/2). py = 0 is the top row; the sample
// lands at (px + jitter.x, py + jitter.y).
inline Ray camera_ray(const CameraSpec& cam, int px, int py, double jitter_x, double jitter_y) {
    Vec3 forward = (cam.look_at - cam.eye).normalized();
    Vec3 right = forward.cross(cam.up).normalized();
    Vec3 true_up = right.cross(forward);

    double half_h = std::tan(deg_to_rad(cam.fov_deg) * 0.5);
    double half_w = half_h * double(cam.width) / double(cam.height);

    double sx = (px + jitter_x) / double(cam.width) * 2.0 - 1.0;   // -1 left .. +1 right
    double sy = 1.0 - (py + jitter_y) / double(cam.height) * 2.0;  // +1 top .. -1 bottom

    Vec3 dir = (forward + right * (sx * half_w) + true_up * (sy * half_h)).normalized();
    return Ray{cam.eye, dir, kRayEpsilon, std::numeric_limits<double>::infinity()};
}

// Rendered view plus its exact texture derivative. The map from attacked
// texels to linear radiance is affine (diffuse shading has no recursion and
// specular weights do not depend on the texture), so frame = base + J.vec(T)
// holds exactly and base is derived as frame - J.vec(T).
struct RenderOutput {
    FrameBuffer frame;
    SparseJacobian jacobian;
    FrameBuffer base;
};

namespace rtdetail {

struct TraceContext {
    const Scene& scene;
    const Texture& attacked_tex;
    const RenderSpec& settings;
    std::vector<TapeEntry>* tape;
    int pixel_index;
};

inline Rgb reflect(const Vec3& d, const Vec3& n) { return d - n * (2.0 * d.dot(n)); }

// Direct lighting with inverse-square falloff and binary shadow visibility.
// The lambertian 1/pi is folded into light intensity by convention.
inline Rgb irradiance_at(const TraceContext& ctx, const Point3& p, const Vec3& n) {
    Rgb irr{};
    for (const LightSpec& light : ctx.scene.lights) {
        Vec3 to_light = light.position - p;
        double d2 = to_light.norm2();
        if (d2 <= 0) continue;
        double dist = std::sqrt(d2);
        Vec3 wi = to_light / dist;
        double cos_theta = n.dot(wi);
        if (cos_theta <= 0) continue;
        if (ctx.settings.shadows &&
            ctx.scene.bvh.intersect_any(Ray{p, wi, kRayEpsilon}, dist))
            continue;
        irr += light.intensity * (cos_theta / d2);
    }
    return irr;
}

// Whitted trace: direct lighting at diffuse hits, recursion only at specular
// surfaces. depth counts ray segments (primary = 1); specular recursion past
// settings.max_depth returns black. throughput carries accumulated specular
// weights times the 1/spp sample weight, and scales tape entries so the
// recorded jacobian matches the framebuffer exactly.
inline Rgb trace(const TraceContext& ctx, const Ray& ray, int depth, const Rgb& throughput) {
    auto hit = ctx.scene.bvh.intersect(ray);
    if (!hit) return ctx.scene.background;

    const CompiledMaterial& mat = ctx.scene.objects[hit->object_id].material;

    switch (mat.kind) {
        case MaterialKind::Lambertian: {
            bool attacked = hit->object_id == ctx.scene.attacked_id;
            Rgb irr = irradiance_at(ctx, hit->point, hit->normal);
            Rgb albedo;
            if (attacked) {
                TexSample s = sample_texture(ctx.attacked_tex, hit->uv.u, hit->uv.v);
                albedo = s.color;
                if (ctx.tape) {
                    for (int i = 0; i < 4; i++)
                        ctx.tape->push_back({ctx.pixel_index, s.texel[i],
                                             irr.cmul(throughput) * s.weight[i]});
                }
            } else if (mat.textured()) {
                albedo = sample_texture(mat.texture, hit->uv.u, hit->uv.v).color;
            } else {
                albedo = mat.albedo;
            }
            return albedo.cmul(irr);
        }
        case MaterialKind::Mirror: {
            if (depth >= ctx.settings.max_depth) return {};
            Vec3 r = reflect(ray.dir, hit->normal).normalized();
            return trace(ctx, Ray{hit->point, r, kRayEpsilon}, depth + 1, throughput);
        }
        case MaterialKind::Dielectric: {
            if (depth >= ctx.settings.max_depth) return {};
            // eta = n_incident / n_transmitted
            double eta = hit->front_face ? 1.0 / mat.ior : mat.ior;
            double cos_i = std::fmin(1.0, (-ray.dir).dot(hit->normal));
            double sin2_t = eta * eta * (1.0 - cos_i * cos_i);

            Vec3 refl = reflect(ray.dir, hit->normal).normalized();
            if (sin2_t > 1.0) {  // total internal reflection
                return trace(ctx, Ray{hit->point, refl, kRayEpsilon}, depth + 1, throughput);
            }
            double f0 = (1.0 - eta) / (1.0 + eta);
            f0 *= f0;
            double fresnel = f0 + (1.0 - f0) * std::pow(1.0 - cos_i, 5.0);

            double cos_t = std::sqrt(1.0 - sin2_t);
            Vec3 refr = (ray.dir * eta + hit->normal * (eta * cos_i - cos_t)).normalized();

            Rgb reflected = trace(ctx, Ray{hit->point, refl, kRayEpsilon}, depth + 1,
                                  throughput * fresnel);
            Rgb transmitted = trace(ctx, Ray{hit->point, refr, kRayEpsilon}, depth + 1,
                                    throughput * (1.0 - fresnel));
            return reflected * fresnel + transmitted * (1.0 - fresnel);
        }
    }
    return {};
}

}  // namespace rtdetail

// Renders one view and records the exact texture jacobian. Deterministic for
// a fixed (scene, camera, settings, texture, seed): pixels are independent,
// per-pixel jitter streams are seeded from (seed, pixel), and tile tapes are
// merged in tile order, so the result is bit-identical for any worker count.
inline RenderOutput render(const Scene& scene, const CameraSpec& cam, const RenderSpec& settings,
                           const Texture& attacked_tex, uint64_t seed) {
    ADVRAY_CHECK(attacked_tex.pixel_count() == scene.initial_texture.pixel_count(),
                 "render: attacked texture shape mismatch");
    const int w = cam.width, h = cam.height;
    const int spp = settings.samples_per_pixel;
    FrameBuffer frame(w, h);

    const int rows_per_tile = 16;
    const int tile_count = (h + rows_per_tile - 1) / rows_per_tile;
    std::vector<std::vector<TapeEntry>> tile_tapes(tile_count);

    // stratification grid for spp > 1
    const int strata = std::max(1, int(std::ceil(std::sqrt(double(spp)))));

    auto render_tile = [&](int tile) {
        int y0 = tile * rows_per_tile;
        int y1 = std::min(h, y0 + rows_per_tile);
        std::vector<TapeEntry>& tape = tile_tapes[tile];
        for (int y = y0; y < y1; y++) {
            for (int x = 0; x < w; x++) {
                int pixel = y * w + x;
                rtdetail::TraceContext ctx{scene, attacked_tex, settings, &tape, pixel};
                SplitMix64 rng(mix_seed(seed, uint64_t(pixel)));
                Rgb acc{};
                Rgb sample_weight{1.0 / spp, 1.0 / spp, 1.0 / spp};
                for (int s = 0; s < spp; s++) {
                    double jx = 0.5, jy = 0.5;
                    if (spp > 1) {
                        int cx = s % strata, cy = s / strata;
                        jx = (cx + rng.next_double()) / strata;
                        jy = (cy + rng.next_double()) / strata;
                    }
                    Ray ray = camera_ray(cam, x, y, jx, jy);
                    acc += rtdetail::trace(ctx, ray, 1, sample_weight) * (1.0 / spp);
                }
                ADVRAY_CHECK(acc.finite(), "render: non-finite radiance");
                frame.set(pixel, acc);
            }
        }
    };

    int workers = std::min(resolved_thread_count(), tile_count);
    if (workers <= 1) {
        for (int t = 0; t < tile_count; t++) render_tile(t);
    } else {
        std::atomic<int> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int i = 0; i < workers; i++)
            pool.emplace_back([&] {
                try {
                    int t;
                    while (!failed.load(std::memory_order_relaxed) &&
                           (t = next.fetch_add(1)) < tile_count)
                        render_tile(t);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            });
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    // merge tapes in tile order, then coalesce to (pixel, texel) sorted form
    size_t total = 0;
    for (const auto& t : tile_tapes) total += t.size();
    std::vector<TapeEntry> raw;
    raw.reserve(total);
    for (const auto& t : tile_tapes) raw.insert(raw.end(), t.begin(), t.end());

    RenderOutput out;
    out.jacobian =
        SparseJacobian::coalesce(std::move(raw), w * h, attacked_tex.pixel_count());
    out.base = frame;
    FrameBuffer linear_term = jacobian_apply(out.jacobian, attacked_tex, w, h);
    for (size_t i = 0; i < out.base.data.size(); i++) out.base.data[i] -= linear_term.data[i];
    out.frame = std::move(frame);
    return out;
}

}  // namespace advray
