#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "advray/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"adversarial texture attacks through a differentiable Whitted ray tracer"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::optional<uint64_t> gen_victim;
    int probes = 50;
    double h = 1e-3;

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--scenario", scenario_path, "scenario file (.yaml)")->required();
        cmd->add_option("--set", overrides, "dotted-path override, e.g. attack.epsilon=4.0");
        cmd->add_option("--seed", seed, "override attack.seed");
        if (needs_out) cmd->add_option("--out", out_dir, "output directory");
    };

    CLI::App* validate = app.add_subcommand("validate", "parse and print the canonical scenario");
    add_common(validate, false);

    CLI::App* render = app.add_subcommand("render", "render the benign scene for every view");
    add_common(render, true);

    CLI::App* attack = app.add_subcommand("attack", "run the PGD attack");
    add_common(attack, true);
    attack->add_option("--gen-victim", gen_victim,
                       "generate victim weights with this seed and save to weights_path");

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the full gradient chain");
    add_common(gradcheck, false);
    gradcheck->add_option("--probes", probes, "number of probed texel components (default 50)");
    gradcheck->add_option("--fd-h", h, "central-difference step (default 1e-3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (validate->parsed()) return advray::cli::cmd_validate(scenario_path, overrides, seed);
    if (render->parsed()) return advray::cli::cmd_render(scenario_path, out_dir, overrides, seed);
    if (attack->parsed())
        return advray::cli::cmd_attack(scenario_path, out_dir, overrides, seed, gen_victim);
    if (gradcheck->parsed())
        return advray::cli::cmd_gradcheck(scenario_path, probes, h, overrides, seed);
    return 1;
}
