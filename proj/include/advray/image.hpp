#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "advray/core.hpp"

namespace advray {

// Row-major grid of RGB triples. Shared layout for textures, framebuffers and
// their gradients; the semantic difference is carried by the alias used.
struct RgbGrid {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // 3 * width * height, rgb interleaved

    RgbGrid() = default;
    RgbGrid(int w, int h, Rgb fill = {}) : width(w), height(h), data(size_t(3) * w * h) {
        for (int i = 0; i < w * h; i++) set(i, fill);
    }

    int pixel_count() const { return width * height; }
    size_t value_count() const { return data.size(); }

    Rgb get(int index) const {
        const double* p = &data[size_t(3) * index];
        return {p[0], p[1], p[2]};
    }
    Rgb get(int x, int y) const { return get(y * width + x); }
    void set(int index, const Rgb& c) {
        double* p = &data[size_t(3) * index];
        p[0] = c.x; p[1] = c.y; p[2] = c.z;
    }
    void set(int x, int y, const Rgb& c) { set(y * width + x, c); }
    void add(int index, const Rgb& c) {
        double* p = &data[size_t(3) * index];
        p[0] += c.x; p[1] += c.y; p[2] += c.z;
    }

    bool same_shape(const RgbGrid& o) const { return width == o.width && height == o.height; }
    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const RgbGrid&) const = default;
};

using Texture = RgbGrid;      // texel values in [0, 1]
using FrameBuffer = RgbGrid;  // linear radiance, >= 0
using ImageGrad = RgbGrid;    // signed, same shape as a FrameBuffer
using TextureGrad = RgbGrid;  // signed, same shape as a Texture

// Result of one bilinear texture lookup: the color plus the four contributing
// texel indices and their interpolation weights (sum to 1). The weights are
// what the renderer records on the tape.
struct TexSample {
    Rgb color;
    std::array<int, 4> texel;
    std::array<double, 4> weight;
};

// Bilinear sample with repeat wrapping and texel centers at (i + 0.5) / size.
// Any real uv is valid; negative coordinates wrap like positive ones.
inline TexSample sample_texture(const Texture& tex, double u, double v) {
    int w = tex.width, h = tex.height;
    // continuous texel coordinates such that u = (i + 0.5) / w hits center i
    double x = u * w - 0.5;
    double y = v * h - 0.5;
    double fx = std::floor(x), fy = std::floor(y);
    double ax = x - fx, ay = y - fy;

    auto wrap = [](long long i, int n) {
        long long m = i % n;
        return int(m < 0 ? m + n : m);
    };
    int x0 = wrap((long long)fx, w), x1 = wrap((long long)fx + 1, w);
    int y0 = wrap((long long)fy, h), y1 = wrap((long long)fy + 1, h);

    TexSample s;
    s.texel = {y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1};
    s.weight = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    s.color = {};
    for (int i = 0; i < 4; i++) s.color += tex.get(s.texel[i]) * s.weight[i];
    return s;
}

}  // namespace advray
