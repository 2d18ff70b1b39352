#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "advray/attack.hpp"
#include "advray/detect.hpp"
#include "advray/io.hpp"
#include "advray/raytrace.hpp"
#include "advray/scene.hpp"
#include "advray/scenecfg.hpp"
#include "advray/victim.hpp"

namespace advray::cli {

constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;
namespace fs = std::filesystem;

// --- Shared plumbing ---

inline Scenario load_scenario(const fs::path& path, const std::vector<std::string>& overrides,
                              std::optional<uint64_t> seed) {
    ConfigNode node = parse_config(read_text_file(path));
    for (const std::string& o : overrides) apply_override(node, o);
    if (seed) apply_override(node, "attack.seed=" + std::to_string(*seed));
    return scenario_from_node(node);
}

inline VictimModel load_victim(const Scenario& sc, const fs::path& base_dir,
                               std::optional<uint64_t> gen_seed) {
    fs::path weights = resolve_asset(base_dir, sc.victim.weights_path);
    std::string arch = sc.victim.kind == VictimKind::Cnn ? "tiny-cnn" : "linear";
    if (gen_seed) {
        VictimModel model = init_random(arch, int(sc.victim.classes.size()), sc.victim.input_h,
                                        sc.victim.input_w, *gen_seed);
        fs::create_directories(weights.parent_path().empty() ? "." : weights.parent_path());
        write_file(weights, save_weights(model));
        std::cerr << "generated " << arch << " weights at " << weights.string() << "\n";
    }
    VictimModel model = load_weights(read_file(weights), sc.victim.input_h, sc.victim.input_w);
    if (model.class_count != int(sc.victim.classes.size()))
        throw VictimError("weights: model has " + std::to_string(model.class_count) +
                          " classes but the scenario lists " +
                          std::to_string(sc.victim.classes.size()));
    bool has_conv = false;
    for (const auto& l : model.layers)
        if (std::holds_alternative<Conv2d>(l)) has_conv = true;
    if (has_conv != (sc.victim.kind == VictimKind::Cnn))
        throw VictimError("weights: architecture does not match victim.kind");
    return model;
}

inline json detection_to_json(const Detection& d) {
    return json{{"box", {d.x0, d.y0, d.x1, d.y1}},
                {"class_index", d.class_index},
                {"class_name", d.class_name},
                {"confidence", d.confidence}};
}

inline std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string format_index(const char* pattern, int a, int b = -1) {
    char buf[64];
    if (b >= 0) std::snprintf(buf, sizeof(buf), pattern, a, b);
    else std::snprintf(buf, sizeof(buf), pattern, a);
    return buf;
}

inline int fail(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}

// detect parameters used for all reporting output
constexpr int kDetectGrid = 2;
constexpr int kDetectTopK = 5;

// --- Commands ---

// Parses, applies overrides, validates, prints the canonical scenario.
inline int cmd_validate(const fs::path& scenario_path, const std::vector<std::string>& overrides,
                        std::optional<uint64_t> seed = {}) {
    try {
        Scenario sc = load_scenario(scenario_path, overrides, seed);
        std::cout << serialize_scenario(sc);
        return 0;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

// Renders every expanded view of the benign scene into view_%02d.ppm plus a
// detections.json with the per-view detector output.
inline int cmd_render(const fs::path& scenario_path, const fs::path& out_dir,
                      const std::vector<std::string>& overrides,
                      std::optional<uint64_t> seed = {}) {
    try {
        Scenario sc = load_scenario(scenario_path, overrides, seed);
        fs::path base_dir = scenario_path.parent_path();
        VictimModel victim = load_victim(sc, base_dir, {});
        Scene scene;
        build_scene(sc, base_dir, scene);

        fs::create_directories(out_dir);
        std::vector<CameraSpec> views = expand_views(sc.attack, sc.scene.camera);
        json dets_doc = json::array();
        for (size_t v = 0; v < views.size(); v++) {
            RenderOutput ro = render(scene, views[v], sc.render, scene.initial_texture,
                                     mix_seed(sc.attack.seed, uint64_t(v)));
            write_file(out_dir / format_index("view_%02d.ppm", int(v)), write_ppm(ro.frame));
            auto dets = detect(victim, clamp01_forward(ro.frame), sc.victim.classes, kDetectGrid,
                               kDetectTopK);
            json entry{{"view", int(v)}, {"detections", json::array()}};
            for (const auto& d : dets) entry["detections"].push_back(detection_to_json(d));
            dets_doc.push_back(entry);
        }
        write_text_file(out_dir / "detections.json", dets_doc.dump(2) + "\n");
        return 0;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

// Runs the PGD attack, emitting frames/iter_%04d_view_%02d.ppm, texture
// snapshots (raw .tex plus a gamma preview .ppm), one log.jsonl line per
// iteration with the step record and view-0 detections, and manifest.json
// last. Exit 0 when the attack succeeded, 2 when it ran out of budget
// (MaxIters/Stalled), 1 on faults.
inline int cmd_attack(const fs::path& scenario_path, const fs::path& out_dir,
                      const std::vector<std::string>& overrides,
                      std::optional<uint64_t> seed = {},
                      std::optional<uint64_t> gen_victim = {}) {
    try {
        Scenario sc = load_scenario(scenario_path, overrides, seed);
        fs::path base_dir = scenario_path.parent_path();
        VictimModel victim = load_victim(sc, base_dir, gen_victim);
        Scene scene;
        build_scene(sc, base_dir, scene);

        fs::create_directories(out_dir / "frames");
        fs::create_directories(out_dir / "textures");
        std::ofstream log(out_dir / "log.jsonl", std::ios::trunc);
        if (!log) throw IoError("cannot write " + (out_dir / "log.jsonl").string());

        auto started_at = std::chrono::system_clock::now();
        std::vector<std::string> frame_files, texture_files;
        FrameBuffer view0_frame;

        AttackSinks sinks;
        sinks.frame = [&](int iter, int view, const FrameBuffer& fb) {
            std::string name = format_index("iter_%04d_view_%02d.ppm", iter, view);
            write_file(out_dir / "frames" / name, write_ppm(fb));
            frame_files.push_back("frames/" + name);
            if (view == 0) view0_frame = fb;
        };
        sinks.texture = [&](int iter, const Texture& tex) {
            std::string base = format_index("iter_%04d", iter);
            write_file(out_dir / "textures" / (base + ".tex"), write_texture_raw(tex));
            write_file(out_dir / "textures" / (base + ".ppm"), write_ppm(tex));
            texture_files.push_back("textures/" + base + ".tex");
        };
        sinks.record = [&](const StepRecord& rec) {
            auto dets = detect(victim, clamp01_forward(view0_frame), sc.victim.classes,
                               kDetectGrid, kDetectTopK);
            json line{{"iter", rec.iter},
                      {"mean_loss", rec.mean_loss},
                      {"view_losses", rec.view_losses},
                      {"view_argmax", rec.view_argmax},
                      {"grad_norm", rec.grad_norm},
                      {"success", rec.success},
                      {"detections", json::array()}};
            for (const auto& d : dets) line["detections"].push_back(detection_to_json(d));
            log << line.dump() << "\n";
            std::cerr << "iter " << rec.iter << "/" << sc.attack.iterations
                      << " loss=" << rec.mean_loss << " success=" << (rec.success ? "yes" : "no")
                      << "\n";
        };

        AttackResult result = run_attack(sc, scene, victim, sinks);
        log.close();

        json manifest{
            {"tool_version", kToolVersion},
            {"scenario", serialize_scenario(sc)},
            {"seed", sc.attack.seed},
            {"started_at", iso8601_utc(started_at)},
            {"finished_at", iso8601_utc(std::chrono::system_clock::now())},
            {"stop_reason", to_string(result.stop_reason)},
            {"iterations_run", int(result.history.size()) - 1},
            {"benign_labels", result.benign_labels},
            {"files",
             {{"frames", frame_files}, {"textures", texture_files}, {"log", "log.jsonl"}}},
            {"final",
             {{"mean_loss", result.history.back().mean_loss},
              {"grad_norm", result.history.back().grad_norm},
              {"success", result.history.back().success}}},
        };
        write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

        bool succeeded = result.stop_reason == StopReason::TargetReached ||
                         result.stop_reason == StopReason::LabelFlipped;
        std::cerr << "attack finished: " << to_string(result.stop_reason) << "\n";
        return succeeded ? 0 : 2;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

// Full-pipeline finite-difference check: central differences of the EoT loss
// at random texel components against the analytic gradient. Prints
// "gradcheck max_rel_err=<float> probes=<n>"; exit 0 below the 1e-2
// threshold, 2 above it, 1 on faults.
inline int cmd_gradcheck(const fs::path& scenario_path, int probes, double h,
                         const std::vector<std::string>& overrides,
                         std::optional<uint64_t> seed = {}) {
    if (probes <= 0) {
        std::cerr << "error: probes must be >= 1\n";
        return 1;
    }
    try {
        if (!(h > 0)) throw InternalError("h must be > 0");
        Scenario sc = load_scenario(scenario_path, overrides, seed);
        fs::path base_dir = scenario_path.parent_path();
        VictimModel victim = load_victim(sc, base_dir, {});
        Scene scene;
        build_scene(sc, base_dir, scene);

        std::vector<CameraSpec> views = expand_views(sc.attack, sc.scene.camera);
        const Texture& tex = scene.initial_texture;

        auto eval_all = [&](const Texture& t) {
            std::vector<ViewEval> evals;
            for (size_t v = 0; v < views.size(); v++)
                evals.push_back(
                    eval_view(scene, sc.render, views[v], t, victim, mix_seed(sc.attack.seed, v)));
            return evals;
        };

        std::vector<ViewEval> benign = eval_all(tex);
        std::vector<int> benign_labels;
        for (const auto& ev : benign) benign_labels.push_back(ev.top_class);

        EotResult eot = eot_loss_and_grad(benign, victim, sc.attack, benign_labels,
                                          tex.width, tex.height);

        auto loss_fn = [&](const Texture& t) {
            std::vector<ViewEval> evals = eval_all(t);
            double mean = 0;
            for (size_t v = 0; v < evals.size(); v++)
                mean += view_loss(evals[v], sc.attack, benign_labels[v]).first / evals.size();
            return mean;
        };

        SplitMix64 rng(sc.attack.seed);
        std::vector<int> probe_components(static_cast<size_t>(probes), 0);
        for (int i = 0; i < probes; i++)
            probe_components[i] = int(rng.next_below(tex.value_count()));

        double max_rel = finite_diff_gradcheck(loss_fn, tex, eot.grad, probe_components, h);

        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), max_rel);
        std::cout << "gradcheck max_rel_err=" << std::string(buf, res.ptr) << " probes=" << probes
                  << "\n";
        return max_rel < 1e-2 ? 0 : 2;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

}  // namespace advray::cli
