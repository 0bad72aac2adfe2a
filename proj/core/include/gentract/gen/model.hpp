#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gentract/nd/graph.hpp"
#include "gentract/nd/rng.hpp"

namespace gentract::gen {

enum class Objective { Diffusion, FlowMatching };

Objective objective_from_string(const std::string& s);
std::string objective_to_string(Objective o);

struct GeneratorConfig {
    int layers = 4;       // M
    int width = 64;       // n
    int heads = 4;
    int points = 32;      // p
    int context_channels = 0;  // m * C_c, set from the encoder config
    Objective objective = Objective::Diffusion;
    int timesteps = 1000;  // T (diffusion)
};

struct AttentionParams {
    nd::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerParams {
    nd::Tensor ln1_g, ln1_b;
    AttentionParams self_attn;
    nd::Tensor ln2_g, ln2_b;
    AttentionParams cross_attn;
    nd::Tensor ln3_g, ln3_b;
    nd::Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

/// Conditional transformer over streamline point sequences. Input and
/// output live in (p, 3) coordinate space; the prediction head reads as
/// noise (diffusion) or velocity (flow matching) depending on the training
/// objective. The positional table is a fixed sinusoidal constant; the
/// temporal embedding is learned (a T-row table for discrete diffusion
/// steps, a projection of sinusoidal features for continuous flow time).
struct GeneratorParams {
    GeneratorConfig cfg;
    nd::Tensor in_w, in_b;    // 3 -> n
    nd::Tensor pos;           // (p, n), fixed
    nd::Tensor time_table;    // (T, n), diffusion only
    nd::Tensor time_w, time_b;  // (n -> n) over sinusoidal features, flow matching only
    nd::Tensor ctx_w, ctx_b;  // (m * C_c) -> n
    std::vector<LayerParams> layers;
    nd::Tensor final_ln_g, final_ln_b;
    nd::Tensor out_w, out_b;  // n -> 3, zero-initialized

    static GeneratorParams init(const GeneratorConfig& cfg, nd::Rng& rng);
    void visit(const std::function<void(const std::string&, nd::Tensor&)>& fn);
};

/// Per-item conditioning time: diffusion uses discrete steps in [0, T),
/// flow matching continuous times in [0, 1].
struct TimeBatch {
    std::vector<int> steps;
    std::vector<double> times;
};

/// Projects raw conditioning tokens (tok, m*C_c) or (B, tok, m*C_c) to the
/// embedding width.
nd::Var project_context(nd::Graph& g, GeneratorParams& p, nd::Var ctx_tokens, bool frozen);

/// x: (B, p, 3); ctx_n: (B, tok, n) already projected. Returns (B, p, 3).
nd::Var generator_forward(nd::Graph& g, GeneratorParams& p, nd::Var x, const TimeBatch& t, nd::Var ctx_n,
                          bool frozen);

/// Sinusoidal featurization of continuous flow time, one row per element.
nd::Tensor flow_time_features(const std::vector<double>& times, int width);

}  // namespace gentract::gen
