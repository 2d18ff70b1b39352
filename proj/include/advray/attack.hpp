#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "advray/detect.hpp"
#include "advray/diff.hpp"
#include "advray/raytrace.hpp"
#include "advray/scene.hpp"
#include "advray/victim.hpp"

namespace advray {

enum class StopReason { TargetReached, LabelFlipped, MaxIters, Stalled };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::TargetReached: return "TargetReached";
        case StopReason::LabelFlipped: return "LabelFlipped";
        case StopReason::MaxIters: return "MaxIters";
        case StopReason::Stalled: return "Stalled";
    }
    return "?";
}

struct StepRecord {
    int iter = 0;
    double mean_loss = 0;
    std::vector<double> view_losses;
    std::vector<int> view_argmax;
    double grad_norm = 0;
    bool success = false;
    double wall_ms = 0;
};

struct AttackState {
    Texture original;           // T0
    TextureGrad delta;          // perturbation, same shape, signed
    int iter = 0;
    std::vector<StepRecord> history;
    SplitMix64 rng;

    Texture current() const {
        Texture t = original;
        for (size_t i = 0; i < t.data.size(); i++)
            t.data[i] = clamp01(t.data[i] + delta.data[i]);
        return t;
    }
};

struct AttackResult {
    Texture final_texture;
    StopReason stop_reason = StopReason::MaxIters;
    std::vector<StepRecord> history;
    std::vector<int> benign_labels;
};

// Per-step emission hooks; all invoked from the attack loop thread only.
struct AttackSinks {
    std::function<void(int iter, int view, const FrameBuffer&)> frame;
    std::function<void(int iter, const Texture&)> texture;
    std::function<void(const StepRecord&)> record;
};

// --- Norm projections ---

inline double l2_norm(const RgbGrid& g) {
    double s = 0;
    for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

inline RgbGrid project_l2(RgbGrid delta, double eps) {
    ADVRAY_CHECK(eps > 0, "project_l2: eps must be > 0");
    double n = l2_norm(delta);
    if (n > eps) {
        double scale = eps / n;
        for (double& v : delta.data) v *= scale;
    }
    return delta;
}

inline RgbGrid project_linf(RgbGrid delta, double eps) {
    ADVRAY_CHECK(eps > 0, "project_linf: eps must be > 0");
    for (double& v : delta.data) v = std::clamp(v, -eps, eps);
    return delta;
}

// One PGD update: normalized (l2) or sign (linf) descent step, projection
// onto the eps ball, then box repair so T0 + delta stays inside [0, 1].
// The gradient is always descended; untargeted mode flips the sign inside
// the loss instead.
inline TextureGrad pgd_step(const TextureGrad& delta, const TextureGrad& grad,
                            const AttackSpec& spec, const Texture& original) {
    ADVRAY_CHECK(delta.same_shape(grad) && delta.same_shape(original), "pgd_step: shape mismatch");
    TextureGrad next = delta;
    if (spec.norm == NormKind::L2) {
        double n = std::max(l2_norm(grad), 1e-12);
        double scale = -spec.alpha / n;
        for (size_t i = 0; i < next.data.size(); i++) next.data[i] += grad.data[i] * scale;
    } else {
        for (size_t i = 0; i < next.data.size(); i++) {
            double g = grad.data[i];
            if (g > 0) next.data[i] -= spec.alpha;
            else if (g < 0) next.data[i] += spec.alpha;
        }
    }
    next = spec.norm == NormKind::L2 ? project_l2(std::move(next), spec.epsilon)
                                     : project_linf(std::move(next), spec.epsilon);
    for (size_t i = 0; i < next.data.size(); i++)
        next.data[i] = clamp01(original.data[i] + next.data[i]) - original.data[i];
    return next;
}

// checked after every step (feasibility invariant)
inline void assert_feasible(const TextureGrad& delta, const Texture& original,
                            const AttackSpec& spec) {
    double n = spec.norm == NormKind::L2 ? l2_norm(delta) : [&] {
        double m = 0;
        for (double v : delta.data) m = std::fmax(m, std::fabs(v));
        return m;
    }();
    ADVRAY_CHECK(n <= spec.epsilon * (1 + 1e-12) + 1e-15, "attack: perturbation left the eps ball");
    for (size_t i = 0; i < delta.data.size(); i++) {
        double t = original.data[i] + delta.data[i];
        ADVRAY_CHECK(t >= -1e-12 && t <= 1 + 1e-12, "attack: texture left [0, 1]");
    }
}

// --- Differentiable view pipeline ---
//
// render -> clamp01 -> bilinear resize to the victim input -> classifier.
// Each stage keeps what its backward pass needs.

struct ViewEval {
    RenderOutput render_out;
    FrameBuffer clamped;
    RgbGrid resized;
    ForwardCache cache;
    std::vector<double> logits;
    int top_class = -1;
};

inline ViewEval eval_view(const Scene& scene, const RenderSpec& settings, const CameraSpec& cam,
                          const Texture& tex, const VictimModel& victim, uint64_t seed) {
    ViewEval ev;
    ev.render_out = render(scene, cam, settings, tex, seed);
    ev.clamped = clamp01_forward(ev.render_out.frame);
    ev.resized = resize_bilinear_forward(ev.clamped, victim.input_w, victim.input_h);
    ev.logits = forward(victim, image_to_chw(ev.resized), &ev.cache);
    ev.top_class = argmax(ev.logits);
    return ev;
}

// Pulls d loss / d logits back to texel space through one view.
inline TextureGrad backprop_view(const ViewEval& ev, const VictimModel& victim,
                                 std::span<const double> d_logits, int tex_w, int tex_h) {
    Tensor d_input = backward_input(victim, ev.cache, d_logits);
    ImageGrad g_resized = chw_to_image(d_input);
    ImageGrad g_frame = resize_bilinear_backward(ev.render_out.frame.width,
                                                 ev.render_out.frame.height, g_resized);
    g_frame = clamp01_backward(ev.render_out.frame, g_frame);
    return backprop_to_texture(ev.render_out.jacobian, g_frame, tex_w, tex_h);
}

// Loss of one already-evaluated view. Targeted attacks minimize CE to the
// target class; untargeted attacks maximize CE to the benign label recorded
// at iteration 0 (implemented as minimizing its negation). d_logits is scaled
// to match.
inline std::pair<double, std::vector<double>> view_loss(const ViewEval& ev,
                                                        const AttackSpec& spec,
                                                        int benign_label) {
    if (spec.mode == AttackMode::Targeted) {
        return cross_entropy(ev.logits, spec.target_class);
    }
    auto [ce, d] = cross_entropy(ev.logits, benign_label);
    for (double& v : d) v = -v;
    return {-ce, std::move(d)};
}

// Mean loss and mean texture gradient over the expanded views, plus per-view
// telemetry. benign_labels must have one entry per view (ignored in targeted
// mode but sized the same).
struct EotResult {
    double mean_loss = 0;
    TextureGrad grad;
    std::vector<double> view_losses;
    std::vector<int> view_argmax;
};

inline EotResult eot_loss_and_grad(const std::vector<ViewEval>& evals, const VictimModel& victim,
                                   const AttackSpec& spec, const std::vector<int>& benign_labels,
                                   int tex_w, int tex_h) {
    ADVRAY_CHECK(!evals.empty(), "eot: no views");
    ADVRAY_CHECK(benign_labels.size() == evals.size(), "eot: benign label count mismatch");
    EotResult out;
    out.grad = TextureGrad(tex_w, tex_h);
    double inv_k = 1.0 / double(evals.size());
    for (size_t v = 0; v < evals.size(); v++) {
        auto [loss, d_logits] = view_loss(evals[v], spec, benign_labels[v]);
        TextureGrad g = backprop_view(evals[v], victim, d_logits, tex_w, tex_h);
        for (size_t i = 0; i < out.grad.data.size(); i++)
            out.grad.data[i] += g.data[i] * inv_k;
        out.mean_loss += loss * inv_k;
        out.view_losses.push_back(loss);
        out.view_argmax.push_back(evals[v].top_class);
    }
    return out;
}

// --- Attack loop ---
//
// Iteration 0 renders the benign scene, records benign labels per view and
// emits the benign artifacts. Each later iteration takes one PGD step using
// the gradient at the previous iterate (whose renders are already in hand),
// re-renders every view at the stepped texture, and evaluates success there:
// targeted needs the target class to win in all views simultaneously,
// untargeted needs every view to leave its benign label. The attack stops
// after `patience` consecutive successful iterations, when the gradient
// stalls below 1e-12, or at the iteration cap.

inline AttackResult run_attack(const Scenario& scenario, const Scene& scene,
                               const VictimModel& victim, const AttackSinks& sinks) {
    const AttackSpec& spec = scenario.attack;
    std::vector<CameraSpec> views = expand_views(spec, scenario.scene.camera);
    const int tex_w = scene.initial_texture.width;
    const int tex_h = scene.initial_texture.height;

    AttackState state;
    state.original = scene.initial_texture;
    state.delta = TextureGrad(tex_w, tex_h);
    state.rng = SplitMix64(spec.seed);

    auto eval_all = [&](const Texture& tex) {
        std::vector<ViewEval> evals;
        evals.reserve(views.size());
        for (size_t v = 0; v < views.size(); v++)
            evals.push_back(eval_view(scene, scenario.render, views[v], tex, victim,
                                      mix_seed(spec.seed, uint64_t(v))));
        return evals;
    };
    auto emit = [&](int iter, const std::vector<ViewEval>& evals, const Texture& tex,
                    const StepRecord& rec) {
        if (sinks.frame)
            for (size_t v = 0; v < evals.size(); v++)
                sinks.frame(iter, int(v), evals[v].render_out.frame);
        if (sinks.texture) sinks.texture(iter, tex);
        if (sinks.record) sinks.record(rec);
    };

    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    AttackResult result;

    // iteration 0: benign render, benign labels, benign artifacts
    auto t0 = clock::now();
    Texture tex = state.current();
    std::vector<ViewEval> evals = eval_all(tex);
    for (const ViewEval& ev : evals) result.benign_labels.push_back(ev.top_class);

    {
        EotResult benign = eot_loss_and_grad(evals, victim, spec, result.benign_labels,
                                             tex_w, tex_h);
        StepRecord rec;
        rec.iter = 0;
        rec.mean_loss = benign.mean_loss;
        rec.view_losses = benign.view_losses;
        rec.view_argmax = benign.view_argmax;
        rec.grad_norm = 0;
        rec.success = false;
        rec.wall_ms = ms_since(t0);
        state.history.push_back(rec);
        emit(0, evals, tex, rec);
    }

    result.stop_reason = StopReason::MaxIters;
    int consecutive = 0;
    bool stopped = false;

    for (int iter = 1; iter <= spec.iterations && !stopped; iter++) {
        auto it0 = clock::now();
        state.iter = iter;

        EotResult eot = eot_loss_and_grad(evals, victim, spec, result.benign_labels, tex_w, tex_h);
        double grad_norm = l2_norm(eot.grad);
        if (grad_norm < 1e-12) {
            result.stop_reason = StopReason::Stalled;
            break;
        }

        state.delta = pgd_step(state.delta, eot.grad, spec, state.original);
        assert_feasible(state.delta, state.original, spec);

        tex = state.current();
        evals = eval_all(tex);

        StepRecord rec;
        rec.iter = iter;
        rec.grad_norm = grad_norm;
        double inv_k = 1.0 / double(evals.size());
        bool success = true;
        for (size_t v = 0; v < evals.size(); v++) {
            auto [loss, d_unused] = view_loss(evals[v], spec, result.benign_labels[v]);
            (void)d_unused;
            rec.view_losses.push_back(loss);
            rec.view_argmax.push_back(evals[v].top_class);
            rec.mean_loss += loss * inv_k;
            if (spec.mode == AttackMode::Targeted)
                success = success && evals[v].top_class == spec.target_class;
            else
                success = success && evals[v].top_class != result.benign_labels[v];
        }
        rec.success = success;
        rec.wall_ms = ms_since(it0);

        consecutive = success ? consecutive + 1 : 0;
        if (consecutive >= spec.patience) {
            result.stop_reason = spec.mode == AttackMode::Targeted ? StopReason::TargetReached
                                                                   : StopReason::LabelFlipped;
            stopped = true;
        }

        state.history.push_back(rec);
        emit(iter, evals, tex, rec);
    }

    result.final_texture = state.current();
    result.history = std::move(state.history);
    return result;
}

}  // namespace advray
