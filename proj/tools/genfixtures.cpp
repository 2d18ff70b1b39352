// Regenerates the weight files shipped under examples/weights/. Both are
// deterministic, so committed files and regenerated ones are byte-identical.
//
//   linear_rgb.avw  three-class linear victim whose class k is keyed to the
//                   mean of color channel k (class 0 <- red); Dense weights
//                   12 * I, zero bias
//   tiny_cnn.avw    tiny-cnn architecture, seeded random init (seed 1)

#include <filesystem>
#include <iostream>

#include "advray/io.hpp"
#include "advray/victim.hpp"

using namespace advray;

VictimModel make_linear_rgb_victim() {
    VictimModel model;
    model.input_h = 32;
    model.input_w = 32;
    model.class_count = 3;
    model.layers.push_back(GlobalAvgPool{});
    Dense d;
    d.in = 3;
    d.out = 3;
    d.weights.assign(9, 0.0);
    for (int k = 0; k < 3; k++) d.weights[size_t(k) * 3 + k] = 12.0;
    d.bias.assign(3, 0.0);
    model.layers.push_back(d);
    return model;
}

// Seeded high-contrast texture (seed 4). Flat textures leave conv
// preactivations and pool margins nearly tied, which makes h=1e-3 finite
// differences land on ReLU/pool kinks; contrast spreads the margins.
Texture make_pattern_texture() {
    Texture tex(32, 32);
    SplitMix64 rng(4);
    for (double& v : tex.data) v = double(float(rng.next_double(0.2, 0.8)));
    return tex;
}

int main(int argc, char** argv) {
    std::filesystem::path root = argc > 1 ? argv[1] : "examples";
    std::filesystem::create_directories(root / "weights");
    std::filesystem::create_directories(root / "textures");

    write_file(root / "weights" / "linear_rgb.avw", save_weights(make_linear_rgb_victim()));
    write_file(root / "weights" / "tiny_cnn.avw",
               save_weights(init_random("tiny-cnn", 3, 32, 32, 1)));
    write_file(root / "textures" / "quad_pattern.tex",
               write_texture_raw(make_pattern_texture()));

    std::cout << "wrote fixtures under " << root.string() << "\n";
    return 0;
}
