#pragma once

#include <algorithm>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "advray/core.hpp"
#include "advray/image.hpp"

namespace advray {

struct VictimError : std::runtime_error {
    explicit VictimError(const std::string& what) : std::runtime_error(what) {}
};

// Channels-first tensor (C, H, W for images), contiguous doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        data.assign(n, 0.0);
    }

    double& at(int c, int y, int x) { return data[(size_t(c) * shape[1] + y) * shape[2] + x]; }
    double at(int c, int y, int x) const {
        return data[(size_t(c) * shape[1] + y) * shape[2] + x];
    }
};

// An image framebuffer (row-major rgb) as a 3xHxW tensor. Pure permutation;
// chw_to_image is its exact adjoint (used for gradients).
inline Tensor image_to_chw(const RgbGrid& img) {
    Tensor t({3, img.height, img.width});
    for (int y = 0; y < img.height; y++)
        for (int x = 0; x < img.width; x++) {
            Rgb v = img.get(x, y);
            t.at(0, y, x) = v.x;
            t.at(1, y, x) = v.y;
            t.at(2, y, x) = v.z;
        }
    return t;
}

inline RgbGrid chw_to_image(const Tensor& t) {
    ADVRAY_CHECK(t.shape.size() == 3 && t.shape[0] == 3, "chw_to_image: expected 3xHxW");
    RgbGrid img(t.shape[2], t.shape[1]);
    for (int y = 0; y < t.shape[1]; y++)
        for (int x = 0; x < t.shape[2]; x++)
            img.set(x, y, {t.at(0, y, x), t.at(1, y, x), t.at(2, y, x)});
    return img;
}

// --- Layers ---
//
// Conv2d is cross-correlation with a fixed 3x3 kernel, stride 1, zero
// padding 1. MaxPool2 is 2x2 stride 2 (trailing odd row/column dropped),
// ties broken by the first maximal element in row-major order.

struct Conv2d {
    int out_ch, in_ch;
    std::vector<double> weights;  // [out][in][3][3]
    std::vector<double> bias;     // [out]
};
struct ReLU {};
struct MaxPool2 {};
struct GlobalAvgPool {};
struct Dense {
    int out, in;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out]
};

using LayerSpec = std::variant<Conv2d, ReLU, MaxPool2, GlobalAvgPool, Dense>;

struct VictimModel {
    std::vector<LayerSpec> layers;
    int input_h = 0, input_w = 0;
    int class_count = 0;
};

// Per-layer state captured by forward for the input-gradient backward pass.
struct ForwardCache {
    std::vector<Tensor> inputs;               // input tensor of each layer
    std::vector<std::vector<int>> pool_argmax;  // flat input index per pool output
};

namespace victimdetail {

inline void validate_chain(const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw VictimError("victim: empty layer chain");
    bool flattened = false;
    for (size_t i = 0; i < layers.size(); i++) {
        bool is_dense = std::holds_alternative<Dense>(layers[i]);
        bool is_gap = std::holds_alternative<GlobalAvgPool>(layers[i]);
        if (flattened && !is_dense)
            throw VictimError("victim: only Dense may follow GlobalAvgPool (layer " +
                              std::to_string(i) + ")");
        if (is_dense && !flattened)
            throw VictimError("victim: Dense requires GlobalAvgPool or Dense before it (layer " +
                              std::to_string(i) + ")");
        if (is_gap) flattened = true;
    }
    if (!std::holds_alternative<Dense>(layers.back()))
        throw VictimError("victim: final layer must be Dense");
}

}  // namespace victimdetail

// Forward pass; the cache is required by backward_input.
inline std::vector<double> forward(const VictimModel& model, const Tensor& image,
                                   ForwardCache* cache = nullptr) {
    if (image.shape.size() != 3 || image.shape[0] != 3 || image.shape[1] != model.input_h ||
        image.shape[2] != model.input_w)
        throw VictimError("victim forward: input shape mismatch");

    Tensor cur = image;
    if (cache) {
        cache->inputs.clear();
        cache->pool_argmax.assign(model.layers.size(), {});
    }

    for (size_t li = 0; li < model.layers.size(); li++) {
        if (cache) cache->inputs.push_back(cur);
        const LayerSpec& layer = model.layers[li];

        if (const Conv2d* conv = std::get_if<Conv2d>(&layer)) {
            int h = cur.shape[1], w = cur.shape[2];
            if (cur.shape[0] != conv->in_ch) throw VictimError("victim forward: conv channel mismatch");
            Tensor out({conv->out_ch, h, w});
            for (int o = 0; o < conv->out_ch; o++) {
                const double* wo = &conv->weights[size_t(o) * conv->in_ch * 9];
                for (int y = 0; y < h; y++)
                    for (int x = 0; x < w; x++) {
                        double acc = conv->bias[o];
                        for (int i = 0; i < conv->in_ch; i++) {
                            const double* wi = wo + size_t(i) * 9;
                            for (int ky = 0; ky < 3; ky++) {
                                int sy = y + ky - 1;
                                if (sy < 0 || sy >= h) continue;
                                for (int kx = 0; kx < 3; kx++) {
                                    int sx = x + kx - 1;
                                    if (sx < 0 || sx >= w) continue;
                                    acc += wi[ky * 3 + kx] * cur.at(i, sy, sx);
                                }
                            }
                        }
                        out.at(o, y, x) = acc;
                    }
            }
            cur = std::move(out);
        } else if (std::holds_alternative<ReLU>(layer)) {
            for (double& v : cur.data) v = v > 0 ? v : 0;
        } else if (std::holds_alternative<MaxPool2>(layer)) {
            int c = cur.shape[0], h = cur.shape[1] / 2, w = cur.shape[2] / 2;
            if (h < 1 || w < 1) throw VictimError("victim forward: input too small for MaxPool2");
            Tensor out({c, h, w});
            std::vector<int>* argmax = cache ? &cache->pool_argmax[li] : nullptr;
            if (argmax) argmax->resize(size_t(c) * h * w);
            for (int i = 0; i < c; i++)
                for (int y = 0; y < h; y++)
                    for (int x = 0; x < w; x++) {
                        double best = -std::numeric_limits<double>::infinity();
                        int best_idx = 0;
                        for (int dy = 0; dy < 2; dy++)
                            for (int dx = 0; dx < 2; dx++) {
                                double v = cur.at(i, 2 * y + dy, 2 * x + dx);
                                if (v > best) {  // strict: first maximum wins ties
                                    best = v;
                                    best_idx = (i * cur.shape[1] + 2 * y + dy) * cur.shape[2] +
                                               2 * x + dx;
                                }
                            }
                        out.at(i, y, x) = best;
                        if (argmax) (*argmax)[(size_t(i) * h + y) * w + x] = best_idx;
                    }
            cur = std::move(out);
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            int c = cur.shape[0];
            double inv = 1.0 / (double(cur.shape[1]) * cur.shape[2]);
            Tensor out({c});
            for (int i = 0; i < c; i++) {
                double s = 0;
                size_t base = size_t(i) * cur.shape[1] * cur.shape[2];
                for (size_t k = 0; k < size_t(cur.shape[1]) * cur.shape[2]; k++)
                    s += cur.data[base + k];
                out.data[i] = s * inv;
            }
            cur = std::move(out);
        } else if (const Dense* dense = std::get_if<Dense>(&layer)) {
            if (int(cur.data.size()) != dense->in)
                throw VictimError("victim forward: dense input size mismatch");
            Tensor out({dense->out});
            for (int o = 0; o < dense->out; o++) {
                double acc = dense->bias[o];
                const double* row = &dense->weights[size_t(o) * dense->in];
                for (int i = 0; i < dense->in; i++) acc += row[i] * cur.data[i];
                out.data[o] = acc;
            }
            cur = std::move(out);
        }
    }
    return cur.data;
}

// Exact input gradient by reverse traversal of the cached forward pass.
// ReLU uses subgradient 0 at 0; pooling routes to the cached argmax.
inline Tensor backward_input(const VictimModel& model, const ForwardCache& cache,
                             std::span<const double> d_logits) {
    if (cache.inputs.size() != model.layers.size())
        throw VictimError("victim backward: cache does not match model");

    Tensor grad({int(d_logits.size())});
    grad.data.assign(d_logits.begin(), d_logits.end());

    for (int li = int(model.layers.size()) - 1; li >= 0; li--) {
        const LayerSpec& layer = model.layers[li];
        const Tensor& input = cache.inputs[li];

        if (const Conv2d* conv = std::get_if<Conv2d>(&layer)) {
            int h = input.shape[1], w = input.shape[2];
            Tensor g_in({conv->in_ch, h, w});
            for (int o = 0; o < conv->out_ch; o++) {
                const double* wo = &conv->weights[size_t(o) * conv->in_ch * 9];
                for (int y = 0; y < h; y++)
                    for (int x = 0; x < w; x++) {
                        double g = grad.at(o, y, x);
                        if (g == 0) continue;
                        for (int i = 0; i < conv->in_ch; i++) {
                            const double* wi = wo + size_t(i) * 9;
                            for (int ky = 0; ky < 3; ky++) {
                                int sy = y + ky - 1;
                                if (sy < 0 || sy >= h) continue;
                                for (int kx = 0; kx < 3; kx++) {
                                    int sx = x + kx - 1;
                                    if (sx < 0 || sx >= w) continue;
                                    g_in.at(i, sy, sx) += wi[ky * 3 + kx] * g;
                                }
                            }
                        }
                    }
            }
            grad = std::move(g_in);
        } else if (std::holds_alternative<ReLU>(layer)) {
            for (size_t k = 0; k < grad.data.size(); k++)
                if (input.data[k] <= 0) grad.data[k] = 0;
        } else if (std::holds_alternative<MaxPool2>(layer)) {
            Tensor g_in(input.shape);
            const std::vector<int>& argmax = cache.pool_argmax[li];
            for (size_t k = 0; k < grad.data.size(); k++) g_in.data[argmax[k]] += grad.data[k];
            grad = std::move(g_in);
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            Tensor g_in(input.shape);
            double inv = 1.0 / (double(input.shape[1]) * input.shape[2]);
            for (int i = 0; i < input.shape[0]; i++) {
                double g = grad.data[i] * inv;
                size_t base = size_t(i) * input.shape[1] * input.shape[2];
                for (size_t k = 0; k < size_t(input.shape[1]) * input.shape[2]; k++)
                    g_in.data[base + k] = g;
            }
            grad = std::move(g_in);
        } else if (const Dense* dense = std::get_if<Dense>(&layer)) {
            Tensor g_in(input.shape);
            for (int o = 0; o < dense->out; o++) {
                double g = grad.data[o];
                if (g == 0) continue;
                const double* row = &dense->weights[size_t(o) * dense->in];
                for (int i = 0; i < dense->in; i++) g_in.data[i] += row[i] * g;
            }
            grad = std::move(g_in);
        }
    }
    return grad;
}

// Numerically stable cross-entropy of logits against a class index.
// Returns the loss and d loss / d logits = softmax - onehot.
inline std::pair<double, std::vector<double>> cross_entropy(std::span<const double> logits,
                                                            int class_index) {
    if (class_index < 0 || size_t(class_index) >= logits.size())
        throw VictimError("cross_entropy: class index out of range");
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double l : logits) sum += std::exp(l - m);
    double lse = m + std::log(sum);
    double loss = lse - logits[class_index];
    std::vector<double> d(logits.size());
    for (size_t i = 0; i < logits.size(); i++) d[i] = std::exp(logits[i] - lse);
    d[class_index] -= 1.0;
    return {loss, std::move(d)};
}

inline int argmax(std::span<const double> v) {
    return int(std::max_element(v.begin(), v.end()) - v.begin());
}

// --- Weights file ("AVW1") ---
//
// magic "AVW1" | u32 LE version=1 | u32 LE layer count | per layer:
//   u8 type (1 Conv2d, 2 ReLU, 3 MaxPool2, 4 GlobalAvgPool, 5 Dense)
//   Conv2d: u32 out_ch, u32 in_ch, f32 weights[out][in][3][3], f32 bias[out]
//   Dense:  u32 out,    u32 in,    f32 weights[out][in],       f32 bias[out]
// All multi-byte values little-endian. Byte length must exactly match the
// header-derived size. Weights are stored as f32, held as doubles in memory;
// save(load(bytes)) is byte-identical.

namespace victimdetail {

struct ByteWriter {
    std::vector<uint8_t> out;
    void u8(uint8_t v) { out.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; i++) out.push_back(uint8_t(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f32_array(const std::vector<double>& vals) {
        for (double v : vals) f32(float(v));
    }
};

struct ByteReader {
    std::span<const uint8_t> in;
    size_t pos = 0;
    int layer = -1;  // for error context

    void need(size_t n, const char* what) {
        if (pos + n > in.size())
            throw VictimError(std::string("weights: unexpected end of data reading ") + what +
                              (layer >= 0 ? " (layer " + std::to_string(layer) + ")" : ""));
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return in[pos++];
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v |= uint32_t(in[pos++]) << (8 * i);
        return v;
    }
    double f32(const char* what) {
        uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return double(v);
    }
    std::vector<double> f32_array(size_t n, const char* what) {
        std::vector<double> vals(n);
        for (size_t i = 0; i < n; i++) vals[i] = f32(what);
        return vals;
    }
};

}  // namespace victimdetail

inline std::vector<uint8_t> save_weights(const VictimModel& model) {
    victimdetail::ByteWriter w;
    w.u8('A'); w.u8('V'); w.u8('W'); w.u8('1');
    w.u32(1);
    w.u32(uint32_t(model.layers.size()));
    for (const LayerSpec& layer : model.layers) {
        if (const Conv2d* conv = std::get_if<Conv2d>(&layer)) {
            w.u8(1);
            w.u32(uint32_t(conv->out_ch));
            w.u32(uint32_t(conv->in_ch));
            w.f32_array(conv->weights);
            w.f32_array(conv->bias);
        } else if (std::holds_alternative<ReLU>(layer)) {
            w.u8(2);
        } else if (std::holds_alternative<MaxPool2>(layer)) {
            w.u8(3);
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            w.u8(4);
        } else if (const Dense* dense = std::get_if<Dense>(&layer)) {
            w.u8(5);
            w.u32(uint32_t(dense->out));
            w.u32(uint32_t(dense->in));
            w.f32_array(dense->weights);
            w.f32_array(dense->bias);
        }
    }
    return std::move(w.out);
}

inline VictimModel load_weights(std::span<const uint8_t> bytes, int input_h, int input_w) {
    victimdetail::ByteReader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "AVW1", 4) != 0)
        throw VictimError("weights: bad magic, not an AVW1 file");
    r.pos = 4;
    uint32_t version = r.u32("version");
    if (version != 1) throw VictimError("weights: unsupported version " + std::to_string(version));
    uint32_t count = r.u32("layer count");

    VictimModel model;
    model.input_h = input_h;
    model.input_w = input_w;
    for (uint32_t li = 0; li < count; li++) {
        r.layer = int(li);
        uint8_t type = r.u8("layer type");
        switch (type) {
            case 1: {
                Conv2d conv;
                conv.out_ch = int(r.u32("conv dims"));
                conv.in_ch = int(r.u32("conv dims"));
                if (conv.out_ch <= 0 || conv.in_ch <= 0 || conv.out_ch > 4096 || conv.in_ch > 4096)
                    throw VictimError("weights: implausible conv dims (layer " +
                                      std::to_string(li) + ")");
                conv.weights = r.f32_array(size_t(conv.out_ch) * conv.in_ch * 9, "conv weights");
                conv.bias = r.f32_array(size_t(conv.out_ch), "conv bias");
                model.layers.push_back(std::move(conv));
                break;
            }
            case 2: model.layers.push_back(ReLU{}); break;
            case 3: model.layers.push_back(MaxPool2{}); break;
            case 4: model.layers.push_back(GlobalAvgPool{}); break;
            case 5: {
                Dense dense;
                dense.out = int(r.u32("dense dims"));
                dense.in = int(r.u32("dense dims"));
                if (dense.out <= 0 || dense.in <= 0 || dense.out > 65536 || dense.in > 65536)
                    throw VictimError("weights: implausible dense dims (layer " +
                                      std::to_string(li) + ")");
                dense.weights = r.f32_array(size_t(dense.out) * dense.in, "dense weights");
                dense.bias = r.f32_array(size_t(dense.out), "dense bias");
                model.layers.push_back(std::move(dense));
                break;
            }
            default:
                throw VictimError("weights: unknown layer type " + std::to_string(type) +
                                  " (layer " + std::to_string(li) + ")");
        }
    }
    if (r.pos != bytes.size()) throw VictimError("weights: trailing bytes after last layer");
    victimdetail::validate_chain(model.layers);
    model.class_count = std::get<Dense>(model.layers.back()).out;
    return model;
}

// --- Seeded initialization ---
//
// Weights come from a single SplitMix64 stream (see core.hpp), uniform in
// [-sqrt(3), sqrt(3)) scaled by sqrt(2 / fan_in) and rounded to f32 so the
// model round-trips through the weights file bit-exactly. Biases are zero.

namespace victimdetail {

inline std::vector<double> init_tensor(SplitMix64& rng, size_t n, int fan_in) {
    double scale = std::sqrt(2.0 / fan_in) * std::sqrt(3.0);
    std::vector<double> vals(n);
    for (size_t i = 0; i < n; i++)
        vals[i] = double(float((2 * rng.next_double() - 1) * scale));
    return vals;
}

}  // namespace victimdetail

// "tiny-cnn": Conv(3->8) ReLU Pool Conv(8->16) ReLU Pool Conv(16->32) ReLU
// GlobalAvgPool Dense(32->classes). "linear": GlobalAvgPool Dense(3->classes).
inline VictimModel init_random(const std::string& arch, int class_count, int input_h, int input_w,
                               uint64_t seed) {
    SplitMix64 rng(seed);
    VictimModel model;
    model.input_h = input_h;
    model.input_w = input_w;
    model.class_count = class_count;

    auto conv = [&](int in, int out) {
        Conv2d c;
        c.in_ch = in;
        c.out_ch = out;
        c.weights = victimdetail::init_tensor(rng, size_t(out) * in * 9, in * 9);
        c.bias.assign(size_t(out), 0.0);
        return c;
    };
    auto dense = [&](int in, int out) {
        Dense d;
        d.in = in;
        d.out = out;
        d.weights = victimdetail::init_tensor(rng, size_t(out) * in, in);
        d.bias.assign(size_t(out), 0.0);
        return d;
    };

    if (arch == "tiny-cnn") {
        model.layers.push_back(conv(3, 8));
        model.layers.push_back(ReLU{});
        model.layers.push_back(MaxPool2{});
        model.layers.push_back(conv(8, 16));
        model.layers.push_back(ReLU{});
        model.layers.push_back(MaxPool2{});
        model.layers.push_back(conv(16, 32));
        model.layers.push_back(ReLU{});
        model.layers.push_back(GlobalAvgPool{});
        model.layers.push_back(dense(32, class_count));
    } else if (arch == "linear") {
        model.layers.push_back(GlobalAvgPool{});
        model.layers.push_back(dense(3, class_count));
    } else {
        throw VictimError("init_random: unknown architecture '" + arch + "'");
    }
    victimdetail::validate_chain(model.layers);
    return model;
}

}  // namespace advray
