#include "gentract/gen/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gentract/nd/ops.hpp"

namespace gentract::gen {

namespace {

nd::Tensor dense_init(int rows, int cols, nd::Rng& rng) {
    nd::Tensor w({rows, cols});
    const double scale = std::sqrt(1.0 / rows);
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = scale * rng.normal();
    return w;
}

nd::Tensor sinusoidal_table(int positions, int width) {
    nd::Tensor t({positions, width});
    const int half = width / 2;
    for (int p = 0; p < positions; ++p)
        for (int j = 0; j < width; ++j) {
            const int k = j < half ? j : j - half;
            const double freq = std::pow(10000.0, -static_cast<double>(k) / std::max(1, half));
            t.at({p, j}) = j < half ? std::sin(p * freq) : std::cos(p * freq);
        }
    return t;
}

nd::Var bind(nd::Graph& g, nd::Tensor& t, bool frozen) { return frozen ? g.input(t) : g.param(t); }

AttentionParams attn_init(int n, nd::Rng& rng) {
    AttentionParams a;
    a.wq = dense_init(n, n, rng);
    a.bq = nd::Tensor::zeros({n});
    a.wk = dense_init(n, n, rng);
    a.bk = nd::Tensor::zeros({n});
    a.wv = dense_init(n, n, rng);
    a.bv = nd::Tensor::zeros({n});
    a.wo = dense_init(n, n, rng);
    a.bo = nd::Tensor::zeros({n});
    return a;
}

// (B, s, n) -> (B, h, s, d)
nd::Var to_heads(nd::Var x, int heads) {
    const auto& sh = x.shape();
    const int b = sh[0], s = sh[1], n = sh[2];
    return nd::permute(nd::reshape(x, {b, s, heads, n / heads}), {0, 2, 1, 3});
}

// (B, h, s, d) -> (B, s, n)
nd::Var from_heads(nd::Var x) {
    const auto& sh = x.shape();
    const int b = sh[0], h = sh[1], s = sh[2], d = sh[3];
    return nd::reshape(nd::permute(x, {0, 2, 1, 3}), {b, s, h * d});
}

nd::Var attention(nd::Graph& g, AttentionParams& p, nd::Var q_in, nd::Var kv_in, int heads, bool frozen) {
    const int n = q_in.shape()[2];
    const int d = n / heads;
    nd::Var q = to_heads(nd::linear(q_in, bind(g, p.wq, frozen), bind(g, p.bq, frozen)), heads);
    nd::Var k = to_heads(nd::linear(kv_in, bind(g, p.wk, frozen), bind(g, p.bk, frozen)), heads);
    nd::Var v = to_heads(nd::linear(kv_in, bind(g, p.wv, frozen), bind(g, p.bv, frozen)), heads);
    nd::Var scores = nd::scale(nd::matmul(q, nd::permute(k, {0, 1, 3, 2})), 1.0 / std::sqrt(double(d)));
    nd::Var probs = nd::softmax(scores, -1);
    nd::Var mixed = from_heads(nd::matmul(probs, v));
    return nd::linear(mixed, bind(g, p.wo, frozen), bind(g, p.bo, frozen));
}

}  // namespace

Objective objective_from_string(const std::string& s) {
    if (s == "diffusion") return Objective::Diffusion;
    if (s == "flow_matching") return Objective::FlowMatching;
    throw std::invalid_argument("unknown objective '" + s + "' (expected diffusion or flow_matching)");
}

std::string objective_to_string(Objective o) {
    return o == Objective::Diffusion ? "diffusion" : "flow_matching";
}

GeneratorParams GeneratorParams::init(const GeneratorConfig& cfg, nd::Rng& rng) {
    if (cfg.width % cfg.heads != 0)
        throw std::invalid_argument("generator: width must be divisible by head count");
    if (cfg.context_channels < 1) throw std::invalid_argument("generator: context_channels must be set");
    GeneratorParams p;
    p.cfg = cfg;
    p.in_w = dense_init(3, cfg.width, rng);
    p.in_b = nd::Tensor::zeros({cfg.width});
    p.pos = sinusoidal_table(cfg.points, cfg.width);
    if (cfg.objective == Objective::Diffusion) {
        p.time_table = nd::Tensor({cfg.timesteps, cfg.width});
        for (std::int64_t i = 0; i < p.time_table.numel(); ++i) p.time_table[i] = 0.02 * rng.normal();
    } else {
        p.time_w = dense_init(cfg.width, cfg.width, rng);
        p.time_b = nd::Tensor::zeros({cfg.width});
    }
    p.ctx_w = dense_init(cfg.context_channels, cfg.width, rng);
    p.ctx_b = nd::Tensor::zeros({cfg.width});
    p.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (LayerParams& l : p.layers) {
        l.ln1_g = nd::Tensor::full({cfg.width}, 1.0);
        l.ln1_b = nd::Tensor::zeros({cfg.width});
        l.self_attn = attn_init(cfg.width, rng);
        l.ln2_g = nd::Tensor::full({cfg.width}, 1.0);
        l.ln2_b = nd::Tensor::zeros({cfg.width});
        l.cross_attn = attn_init(cfg.width, rng);
        l.ln3_g = nd::Tensor::full({cfg.width}, 1.0);
        l.ln3_b = nd::Tensor::zeros({cfg.width});
        l.ff1_w = dense_init(cfg.width, 4 * cfg.width, rng);
        l.ff1_b = nd::Tensor::zeros({4 * cfg.width});
        l.ff2_w = dense_init(4 * cfg.width, cfg.width, rng);
        l.ff2_b = nd::Tensor::zeros({cfg.width});
    }
    p.final_ln_g = nd::Tensor::full({cfg.width}, 1.0);
    p.final_ln_b = nd::Tensor::zeros({cfg.width});
    // Zero output head: the untrained model predicts zero, which keeps the
    // first optimizer steps well-scaled.
    p.out_w = nd::Tensor::zeros({cfg.width, 3});
    p.out_b = nd::Tensor::zeros({3});
    return p;
}

void GeneratorParams::visit(const std::function<void(const std::string&, nd::Tensor&)>& fn) {
    fn("in.w", in_w);
    fn("in.b", in_b);
    if (cfg.objective == Objective::Diffusion) {
        fn("time.table", time_table);
    } else {
        fn("time.w", time_w);
        fn("time.b", time_b);
    }
    fn("ctx.w", ctx_w);
    fn("ctx.b", ctx_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string pre = "layer" + std::to_string(i) + ".";
        LayerParams& l = layers[i];
        const auto attn = [&](const std::string& name, AttentionParams& a) {
            fn(pre + name + ".wq", a.wq);
            fn(pre + name + ".bq", a.bq);
            fn(pre + name + ".wk", a.wk);
            fn(pre + name + ".bk", a.bk);
            fn(pre + name + ".wv", a.wv);
            fn(pre + name + ".bv", a.bv);
            fn(pre + name + ".wo", a.wo);
            fn(pre + name + ".bo", a.bo);
        };
        fn(pre + "ln1.g", l.ln1_g);
        fn(pre + "ln1.b", l.ln1_b);
        attn("self", l.self_attn);
        fn(pre + "ln2.g", l.ln2_g);
        fn(pre + "ln2.b", l.ln2_b);
        attn("cross", l.cross_attn);
        fn(pre + "ln3.g", l.ln3_g);
        fn(pre + "ln3.b", l.ln3_b);
        fn(pre + "ff1.w", l.ff1_w);
        fn(pre + "ff1.b", l.ff1_b);
        fn(pre + "ff2.w", l.ff2_w);
        fn(pre + "ff2.b", l.ff2_b);
    }
    fn("final_ln.g", final_ln_g);
    fn("final_ln.b", final_ln_b);
    fn("out.w", out_w);
    fn("out.b", out_b);
}

nd::Tensor flow_time_features(const std::vector<double>& times, int width) {
    nd::Tensor t({static_cast<int>(times.size()), width});
    const int half = width / 2;
    for (std::size_t i = 0; i < times.size(); ++i)
        for (int j = 0; j < width; ++j) {
            const int k = j < half ? j : j - half;
            const double freq = std::pow(1000.0, -static_cast<double>(k) / std::max(1, half));
            const double arg = 1000.0 * times[i] * freq;
            t.at({static_cast<int>(i), j}) = j < half ? std::sin(arg) : std::cos(arg);
        }
    return t;
}

nd::Var project_context(nd::Graph& g, GeneratorParams& p, nd::Var ctx_tokens, bool frozen) {
    return nd::linear(ctx_tokens, bind(g, p.ctx_w, frozen), bind(g, p.ctx_b, frozen));
}

nd::Var generator_forward(nd::Graph& g, GeneratorParams& p, nd::Var x, const TimeBatch& t, nd::Var ctx_n,
                          bool frozen) {
    const auto& xs = x.shape();
    if (xs.size() != 3 || xs[2] != 3) throw std::invalid_argument("generator_forward: x must be (B, p, 3)");
    if (xs[1] != p.cfg.points)
        throw std::invalid_argument("generator_forward: point count disagrees with the architecture");
    const int b = xs[0];
    if (ctx_n.shape().size() != 3 || ctx_n.shape()[0] != b || ctx_n.shape()[2] != p.cfg.width)
        throw std::invalid_argument("generator_forward: ctx must be (B, tok, n)");

    nd::Var temb{nullptr, -1};
    if (p.cfg.objective == Objective::Diffusion) {
        if (static_cast<int>(t.steps.size()) != b)
            throw std::invalid_argument("generator_forward: one timestep per batch item required");
        for (int s : t.steps)
            if (s < 0 || s >= p.cfg.timesteps) throw std::invalid_argument("generator_forward: timestep out of range");
        temb = nd::embedding_lookup(bind(g, p.time_table, frozen), t.steps);
    } else {
        if (static_cast<int>(t.times.size()) != b)
            throw std::invalid_argument("generator_forward: one flow time per batch item required");
        nd::Var feat = g.input(flow_time_features(t.times, p.cfg.width));
        temb = nd::linear(feat, bind(g, p.time_w, frozen), bind(g, p.time_b, frozen));
    }

    nd::Var h = nd::linear(x, bind(g, p.in_w, frozen), bind(g, p.in_b, frozen));
    h = nd::add_suffix(h, g.input(p.pos));
    h = nd::add(h, nd::broadcast_axis(nd::reshape(temb, {b, 1, p.cfg.width}), 1, p.cfg.points));

    for (LayerParams& l : p.layers) {
        nd::Var n1 = nd::layer_norm(h, bind(g, l.ln1_g, frozen), bind(g, l.ln1_b, frozen));
        h = nd::add(h, attention(g, l.self_attn, n1, n1, p.cfg.heads, frozen));
        nd::Var n2 = nd::layer_norm(h, bind(g, l.ln2_g, frozen), bind(g, l.ln2_b, frozen));
        h = nd::add(h, attention(g, l.cross_attn, n2, ctx_n, p.cfg.heads, frozen));
        nd::Var n3 = nd::layer_norm(h, bind(g, l.ln3_g, frozen), bind(g, l.ln3_b, frozen));
        nd::Var f = nd::linear(nd::gelu(nd::linear(n3, bind(g, l.ff1_w, frozen), bind(g, l.ff1_b, frozen))),
                               bind(g, l.ff2_w, frozen), bind(g, l.ff2_b, frozen));
        h = nd::add(h, f);
    }
    nd::Var nf = nd::layer_norm(h, bind(g, p.final_ln_g, frozen), bind(g, p.final_ln_b, frozen));
    return nd::linear(nf, bind(g, p.out_w, frozen), bind(g, p.out_b, frozen));
}

}  // namespace gentract::gen
