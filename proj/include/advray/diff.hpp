#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "advray/core.hpp"
#include "advray/image.hpp"

namespace advray {

// One tape record from the renderer: d pixel[c] / d texel[c] = weight[c].
// Color channels never mix (albedo modulates componentwise and specular
// weights are scalar), so an rgb weight triple captures the full derivative.
struct TapeEntry {
    int pixel_index;
    int texel_index;
    Rgb weight;
};

// Coalesced pixel-by-texel derivative record of one rendered view. Entries
// are sorted by (pixel, texel) with no duplicate pairs; weights are >= 0.
struct SparseJacobian {
    std::vector<TapeEntry> entries;
    int pixel_count = 0;
    int texel_count = 0;

    static SparseJacobian coalesce(std::vector<TapeEntry> raw, int pixel_count, int texel_count) {
        std::stable_sort(raw.begin(), raw.end(), [](const TapeEntry& a, const TapeEntry& b) {
            if (a.pixel_index != b.pixel_index) return a.pixel_index < b.pixel_index;
            return a.texel_index < b.texel_index;
        });
        SparseJacobian j;
        j.pixel_count = pixel_count;
        j.texel_count = texel_count;
        j.entries.reserve(raw.size());
        for (const TapeEntry& e : raw) {
            if (!j.entries.empty() && j.entries.back().pixel_index == e.pixel_index &&
                j.entries.back().texel_index == e.texel_index)
                j.entries.back().weight += e.weight;
            else
                j.entries.push_back(e);
        }
        return j;
    }
};

// frame_delta[p] = sum over entries of weight (.) T[texel], the linear term
// of the affine map frame = base + J . vec(T).
inline FrameBuffer jacobian_apply(const SparseJacobian& j, const Texture& tex, int frame_w,
                                  int frame_h) {
    ADVRAY_CHECK(frame_w * frame_h == j.pixel_count, "jacobian_apply: frame shape mismatch");
    ADVRAY_CHECK(tex.pixel_count() == j.texel_count, "jacobian_apply: texture shape mismatch");
    FrameBuffer out(frame_w, frame_h);
    for (const TapeEntry& e : j.entries)
        out.add(e.pixel_index, e.weight.cmul(tex.get(e.texel_index)));
    return out;
}

// Adjoint of jacobian_apply: grad[t][c] = sum of weight[c] * g[p][c] over
// entries touching texel t. Untouched texels stay exactly zero.
inline TextureGrad backprop_to_texture(const SparseJacobian& j, const ImageGrad& g, int tex_w,
                                       int tex_h) {
    ADVRAY_CHECK(g.pixel_count() == j.pixel_count, "backprop_to_texture: image shape mismatch");
    ADVRAY_CHECK(tex_w * tex_h == j.texel_count, "backprop_to_texture: texture shape mismatch");
    TextureGrad grad(tex_w, tex_h);
    for (const TapeEntry& e : j.entries)
        grad.add(e.texel_index, e.weight.cmul(g.get(e.pixel_index)));
    return grad;
}

// --- Clamp to [0, 1] ---
//
// Backward uses the inclusive-boundary subgradient: gradient passes where the
// pre-clamp value lies in [0, 1] (including the endpoints) and is zero
// outside.

inline FrameBuffer clamp01_forward(const FrameBuffer& img) {
    FrameBuffer out = img;
    for (double& v : out.data) v = clamp01(v);
    return out;
}

inline ImageGrad clamp01_backward(const FrameBuffer& pre_clamp, const ImageGrad& g) {
    ADVRAY_CHECK(pre_clamp.same_shape(g), "clamp01_backward: shape mismatch");
    ImageGrad out = g;
    for (size_t i = 0; i < out.data.size(); i++) {
        double v = pre_clamp.data[i];
        if (v < 0.0 || v > 1.0) out.data[i] = 0.0;
    }
    return out;
}

// --- Bilinear resize ---
//
// Texel-center alignment, same convention as sample_texture but clamped (not
// wrapped) at the borders. The backward pass is the exact transpose of the
// forward linear map.

namespace diffdetail {

struct ResizeTap {
    int i0, i1;       // source indices
    double w0, w1;    // weights, w0 + w1 = 1
};

inline ResizeTap resize_tap(int out_index, int in_size, int out_size) {
    double x = (out_index + 0.5) * double(in_size) / double(out_size) - 0.5;
    double fx = std::floor(x);
    double a = x - fx;
    int i0 = int(fx), i1 = i0 + 1;
    i0 = std::clamp(i0, 0, in_size - 1);
    i1 = std::clamp(i1, 0, in_size - 1);
    return {i0, i1, 1 - a, a};
}

}  // namespace diffdetail

inline RgbGrid resize_bilinear_forward(const RgbGrid& img, int out_w, int out_h) {
    ADVRAY_CHECK(out_w >= 1 && out_h >= 1, "resize: output size must be positive");
    RgbGrid out(out_w, out_h);
    for (int y = 0; y < out_h; y++) {
        auto ty = diffdetail::resize_tap(y, img.height, out_h);
        for (int x = 0; x < out_w; x++) {
            auto tx = diffdetail::resize_tap(x, img.width, out_w);
            Rgb v = img.get(tx.i0, ty.i0) * (tx.w0 * ty.w0) + img.get(tx.i1, ty.i0) * (tx.w1 * ty.w0) +
                    img.get(tx.i0, ty.i1) * (tx.w0 * ty.w1) + img.get(tx.i1, ty.i1) * (tx.w1 * ty.w1);
            out.set(x, y, v);
        }
    }
    return out;
}

inline RgbGrid resize_bilinear_backward(int in_w, int in_h, const RgbGrid& g_out) {
    RgbGrid g_in(in_w, in_h);
    for (int y = 0; y < g_out.height; y++) {
        auto ty = diffdetail::resize_tap(y, in_h, g_out.height);
        for (int x = 0; x < g_out.width; x++) {
            auto tx = diffdetail::resize_tap(x, in_w, g_out.width);
            Rgb g = g_out.get(x, y);
            g_in.add(ty.i0 * in_w + tx.i0, g * (tx.w0 * ty.w0));
            g_in.add(ty.i0 * in_w + tx.i1, g * (tx.w1 * ty.w0));
            g_in.add(ty.i1 * in_w + tx.i0, g * (tx.w0 * ty.w1));
            g_in.add(ty.i1 * in_w + tx.i1, g * (tx.w1 * ty.w1));
        }
    }
    return g_in;
}

// --- Finite-difference gradient check ---
//
// Central differences of a deterministic loss closure at the probe
// components, compared against a precomputed analytic gradient. Returns the
// maximum over probes of |fd - an| / max(|fd|, |an|, 1e-8).

inline double finite_diff_gradcheck(const std::function<double(const Texture&)>& loss,
                                    const Texture& tex, const TextureGrad& analytic,
                                    std::span<const int> probe_components, double h) {
    ADVRAY_CHECK(h > 0, "gradcheck: h must be positive");
    ADVRAY_CHECK(tex.same_shape(analytic), "gradcheck: gradient shape mismatch");
    double max_rel = 0;
    Texture probe = tex;
    for (int idx : probe_components) {
        ADVRAY_CHECK(idx >= 0 && size_t(idx) < tex.data.size(), "gradcheck: probe out of range");
        double orig = tex.data[idx];
        probe.data[idx] = orig + h;
        double f_plus = loss(probe);
        probe.data[idx] = orig - h;
        double f_minus = loss(probe);
        probe.data[idx] = orig;
        ADVRAY_CHECK(std::isfinite(f_plus) && std::isfinite(f_minus), "gradcheck: non-finite loss");
        double fd = (f_plus - f_minus) / (2 * h);
        double an = analytic.data[idx];
        double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace advray
