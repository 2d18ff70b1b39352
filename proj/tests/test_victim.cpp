#include <catch2/catch_amalgamated.hpp>

#include "advray/victim.hpp"

using namespace advray;

namespace {

Tensor random_image(SplitMix64& rng, int h, int w) {
    Tensor t({3, h, w});
    for (double& v : t.data) v = rng.next_double();
    return t;
}

// Independent loop-nest reimplementation of the tiny-cnn forward pass,
// written against the layer definitions rather than the library code.
std::vector<double> oracle_forward(const VictimModel& model, const Tensor& image) {
    auto conv = [](const std::vector<double>& in, int in_ch, int h, int w, const Conv2d& c) {
        std::vector<double> out(size_t(c.out_ch) * h * w, 0.0);
        for (int o = 0; o < c.out_ch; o++)
            for (int y = 0; y < h; y++)
                for (int x = 0; x < w; x++) {
                    double s = c.bias[o];
                    for (int i = 0; i < in_ch; i++)
                        for (int ky = -1; ky <= 1; ky++)
                            for (int kx = -1; kx <= 1; kx++) {
                                int yy = y + ky, xx = x + kx;
                                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                                s += c.weights[((size_t(o) * in_ch + i) * 3 + (ky + 1)) * 3 +
                                               (kx + 1)] *
                                     in[(size_t(i) * h + yy) * w + xx];
                            }
                    out[(size_t(o) * h + y) * w + x] = s;
                }
        return out;
    };

    std::vector<double> cur = image.data;
    int ch = 3, h = image.shape[1], w = image.shape[2];
    for (const LayerSpec& layer : model.layers) {
        if (const Conv2d* c = std::get_if<Conv2d>(&layer)) {
            cur = conv(cur, ch, h, w, *c);
            ch = c->out_ch;
        } else if (std::holds_alternative<ReLU>(layer)) {
            for (double& v : cur) v = std::max(0.0, v);
        } else if (std::holds_alternative<MaxPool2>(layer)) {
            int oh = h / 2, ow = w / 2;
            std::vector<double> out(size_t(ch) * oh * ow, 0.0);
            for (int i = 0; i < ch; i++)
                for (int y = 0; y < oh; y++)
                    for (int x = 0; x < ow; x++) {
                        double m = cur[(size_t(i) * h + 2 * y) * w + 2 * x];
                        m = std::max(m, cur[(size_t(i) * h + 2 * y) * w + 2 * x + 1]);
                        m = std::max(m, cur[(size_t(i) * h + 2 * y + 1) * w + 2 * x]);
                        m = std::max(m, cur[(size_t(i) * h + 2 * y + 1) * w + 2 * x + 1]);
                        out[(size_t(i) * oh + y) * ow + x] = m;
                    }
            cur = std::move(out);
            h = oh;
            w = ow;
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            std::vector<double> out(size_t(ch), 0.0);
            for (int i = 0; i < ch; i++) {
                double s = 0;
                for (int k = 0; k < h * w; k++) s += cur[size_t(i) * h * w + k];
                out[i] = s / (h * w);
            }
            cur = std::move(out);
            h = w = 1;
        } else if (const Dense* d = std::get_if<Dense>(&layer)) {
            std::vector<double> out(size_t(d->out), 0.0);
            for (int o = 0; o < d->out; o++) {
                double s = d->bias[o];
                for (int i = 0; i < d->in; i++) s += d->weights[size_t(o) * d->in + i] * cur[i];
                out[o] = s;
            }
            cur = std::move(out);
        }
    }
    return cur;
}

VictimModel identity_head(int input_h, int input_w) {
    VictimModel model;
    model.input_h = input_h;
    model.input_w = input_w;
    model.class_count = 3;
    model.layers.push_back(GlobalAvgPool{});
    Dense d;
    d.in = 3;
    d.out = 3;
    d.weights.assign(9, 0.0);
    for (int k = 0; k < 3; k++) d.weights[size_t(k) * 3 + k] = 1.0;
    d.bias.assign(3, 0.0);
    model.layers.push_back(d);
    return model;
}

}  // namespace

TEST_CASE("weights round-trip byte-identically", "[victim]") {
    VictimModel model = init_random("tiny-cnn", 4, 16, 16, 99);
    std::vector<uint8_t> bytes = save_weights(model);
    VictimModel loaded = load_weights(bytes, 16, 16);
    CHECK(save_weights(loaded) == bytes);
    CHECK(loaded.class_count == 4);
}

TEST_CASE("weights format errors", "[victim]") {
    VictimModel model = init_random("linear", 3, 16, 16, 1);
    std::vector<uint8_t> bytes = save_weights(model);

    SECTION("bad magic") {
        bytes[0] = 'X'; bytes[1] = 'X'; bytes[2] = 'X'; bytes[3] = 'X';
        try {
            load_weights(bytes, 16, 16);
            FAIL("expected format error");
        } catch (const VictimError& e) {
            CHECK(std::string(e.what()).find("magic") != std::string::npos);
        }
    }
    SECTION("truncated tensor names the layer") {
        bytes.resize(bytes.size() - 3);
        try {
            load_weights(bytes, 16, 16);
            FAIL("expected truncation error");
        } catch (const VictimError& e) {
            std::string msg = e.what();
            CHECK(msg.find("unexpected end of data") != std::string::npos);
            CHECK(msg.find("layer 1") != std::string::npos);
        }
    }
    SECTION("trailing bytes rejected") {
        bytes.push_back(0);
        CHECK_THROWS_AS(load_weights(bytes, 16, 16), VictimError);
    }
    SECTION("incompatible chain rejected") {
        VictimModel bad;
        bad.layers.push_back(ReLU{});
        Dense d;
        d.in = 3; d.out = 2;
        d.weights.assign(6, 0.0);
        d.bias.assign(2, 0.0);
        bad.layers.push_back(d);
        CHECK_THROWS_AS(load_weights(save_weights(bad), 16, 16), VictimError);
    }
}

TEST_CASE("init_random is deterministic per seed", "[victim]") {
    VictimModel a = init_random("tiny-cnn", 3, 32, 32, 5);
    VictimModel b = init_random("tiny-cnn", 3, 32, 32, 5);
    CHECK(save_weights(a) == save_weights(b));

    VictimModel c = init_random("tiny-cnn", 3, 32, 32, 6);
    CHECK(save_weights(a) != save_weights(c));
}

TEST_CASE("linear victim with identity rows returns channel means", "[victim]") {
    VictimModel model = identity_head(8, 8);
    SplitMix64 rng(2);
    Tensor img = random_image(rng, 8, 8);
    std::vector<double> logits = forward(model, img);
    for (int c = 0; c < 3; c++) {
        double mean = 0;
        for (int k = 0; k < 64; k++) mean += img.data[size_t(c) * 64 + k] / 64.0;
        CHECK(logits[c] == Catch::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("conv identity kernel copies its input", "[victim]") {
    VictimModel model = identity_head(6, 6);
    Conv2d conv;
    conv.in_ch = 3;
    conv.out_ch = 3;
    conv.weights.assign(size_t(3) * 3 * 9, 0.0);
    for (int k = 0; k < 3; k++) conv.weights[(size_t(k) * 3 + k) * 9 + 4] = 1.0;  // center tap
    conv.bias.assign(3, 0.0);
    model.layers.insert(model.layers.begin(), conv);

    SplitMix64 rng(3);
    Tensor img = random_image(rng, 6, 6);
    ForwardCache cache;
    forward(model, img, &cache);
    REQUIRE(cache.inputs.size() == 3);
    // cache.inputs[1] is the conv output (input of the next layer)
    for (size_t i = 0; i < img.data.size(); i++)
        CHECK(cache.inputs[1].data[i] == Catch::Approx(img.data[i]).margin(1e-15));
}

TEST_CASE("maxpool takes the block maximum", "[victim]") {
    VictimModel model = identity_head(2, 2);
    model.layers.insert(model.layers.begin(), MaxPool2{});

    Tensor img({3, 2, 2});
    img.data = {1, 2, 3, 4,  0, 0, 0, 0,  -1, -2, -3, -4};
    std::vector<double> logits = forward(model, img);
    CHECK(logits[0] == 4);
    CHECK(logits[1] == 0);
    CHECK(logits[2] == -1);
}

TEST_CASE("tiny-cnn forward matches the loop-nest oracle", "[victim]") {
    VictimModel model = init_random("tiny-cnn", 5, 16, 16, 7);
    SplitMix64 rng(8);
    for (int trial = 0; trial < 5; trial++) {
        Tensor img = random_image(rng, 16, 16);
        std::vector<double> fast = forward(model, img);
        std::vector<double> slow = oracle_forward(model, img);
        REQUIRE(fast.size() == slow.size());
        for (size_t i = 0; i < fast.size(); i++) CHECK(std::fabs(fast[i] - slow[i]) < 1e-5);
    }
}

TEST_CASE("forward is deterministic", "[victim]") {
    VictimModel model = init_random("tiny-cnn", 3, 16, 16, 11);
    SplitMix64 rng(12);
    Tensor img = random_image(rng, 16, 16);
    CHECK(forward(model, img) == forward(model, img));
}

TEST_CASE("linear backward distributes dense rows uniformly", "[victim]") {
    VictimModel model = init_random("linear", 3, 8, 8, 21);
    const Dense& dense = std::get<Dense>(model.layers.back());

    SplitMix64 rng(22);
    Tensor img = random_image(rng, 8, 8);
    ForwardCache cache;
    forward(model, img, &cache);
    std::vector<double> d_logits = {0.3, -1.0, 0.7};
    Tensor d_img = backward_input(model, cache, d_logits);

    for (int c = 0; c < 3; c++) {
        double expected = 0;
        for (int o = 0; o < 3; o++) expected += dense.weights[size_t(o) * 3 + c] * d_logits[o];
        expected /= 64.0;
        for (int k = 0; k < 64; k++)
            CHECK(d_img.data[size_t(c) * 64 + k] == Catch::Approx(expected).margin(1e-15));
    }
}

TEST_CASE("zero upstream gradient gives zero input gradient", "[victim]") {
    VictimModel model = init_random("tiny-cnn", 3, 16, 16, 31);
    SplitMix64 rng(32);
    Tensor img = random_image(rng, 16, 16);
    ForwardCache cache;
    forward(model, img, &cache);
    std::vector<double> zeros(3, 0.0);
    Tensor d_img = backward_input(model, cache, zeros);
    for (double v : d_img.data) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences on both architectures", "[victim]") {
    for (const char* arch : {"tiny-cnn", "linear"}) {
        VictimModel model = init_random(arch, 3, 16, 16, 41);
        SplitMix64 rng(42);
        Tensor img = random_image(rng, 16, 16);

        ForwardCache cache;
        std::vector<double> logits = forward(model, img, &cache);
        auto [loss0, d_logits] = cross_entropy(logits, 1);
        (void)loss0;
        Tensor analytic = backward_input(model, cache, d_logits);

        double h = 1e-3;
        for (int probe = 0; probe < 30; probe++) {
            size_t idx = rng.next_below(img.data.size());
            Tensor p = img;
            p.data[idx] += h;
            double up = cross_entropy(forward(model, p), 1).first;
            p.data[idx] -= 2 * h;
            double down = cross_entropy(forward(model, p), 1).first;
            double fd = (up - down) / (2 * h);
            double an = analytic.data[idx];
            double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
            CHECK(rel < 1e-3);
        }
    }
}

TEST_CASE("cross entropy values and identities", "[victim]") {
    SECTION("uniform logits") {
        std::vector<double> logits(4, 1.7);
        auto [loss, d] = cross_entropy(logits, 2);
        (void)d;
        CHECK(loss == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SECTION("extreme logits are stable") {
        std::vector<double> logits = {1000.0, 0.0};
        auto [loss, d] = cross_entropy(logits, 0);
        (void)d;
        CHECK(std::isfinite(loss));
        CHECK(loss == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("softmax and gradient identities") {
        SplitMix64 rng(55);
        for (int trial = 0; trial < 20; trial++) {
            std::vector<double> logits(6);
            for (double& l : logits) l = rng.next_double(-30, 30);
            int cls = int(rng.next_below(6));
            auto [loss, d] = cross_entropy(logits, cls);
            (void)loss;
            double dsum = 0, softmax_sum = 0;
            for (size_t i = 0; i < d.size(); i++) {
                dsum += d[i];
                softmax_sum += d[i] + (int(i) == cls ? 1.0 : 0.0);
            }
            CHECK(std::fabs(dsum) < 1e-12);
            CHECK(softmax_sum == Catch::Approx(1.0).epsilon(1e-12));
        }
    }
    SECTION("class out of range") {
        std::vector<double> logits = {0.0, 1.0};
        CHECK_THROWS_AS(cross_entropy(logits, 2), VictimError);
    }
}
