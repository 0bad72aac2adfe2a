#include "gentract/enc/refiner.hpp"

#include <cmath>
#include <stdexcept>

#include "gentract/nd/ops.hpp"

namespace gentract::enc {

namespace {

nd::Tensor conv_init(int co, int ci, int k, nd::Rng& rng) {
    nd::Tensor w({co, ci, k, k, k});
    const double scale = std::sqrt(2.0 / (ci * k * k * k));
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = scale * rng.normal();
    return w;
}

nd::Var bind(nd::Graph& g, nd::Tensor& t, bool frozen) { return frozen ? g.input(t) : g.param(t); }

}  // namespace

RefinerParams RefinerParams::init(const EncoderConfig& cfg, int m, nd::Rng& rng) {
    if (m < 1) throw std::invalid_argument("refiner: m must be >= 1");
    RefinerParams p;
    p.m = m;
    p.c_c = cfg.c_c;
    p.proj_w = conv_init(cfg.c_c, cfg.c_z, 1, rng);
    p.proj_b = nd::Tensor::zeros({cfg.c_c});
    p.embed = nd::Tensor({m, cfg.c_c});
    for (std::int64_t i = 0; i < p.embed.numel(); ++i) p.embed[i] = 0.1 * rng.normal();
    p.res1a_w = conv_init(cfg.c_c, cfg.c_c, 3, rng);
    p.res1a_b = nd::Tensor::zeros({cfg.c_c});
    p.res1b_w = conv_init(cfg.c_c, cfg.c_c, 3, rng);
    p.res1b_b = nd::Tensor::zeros({cfg.c_c});
    p.res2a_w = conv_init(cfg.c_c, cfg.c_c, 3, rng);
    p.res2a_b = nd::Tensor::zeros({cfg.c_c});
    p.res2b_w = conv_init(cfg.c_c, cfg.c_c, 3, rng);
    p.res2b_b = nd::Tensor::zeros({cfg.c_c});
    p.down_w = conv_init(cfg.c_c, cfg.c_c, 3, rng);
    p.down_b = nd::Tensor::zeros({cfg.c_c});
    return p;
}

void RefinerParams::visit(const std::function<void(const std::string&, nd::Tensor&)>& fn) {
    fn("proj.w", proj_w);
    fn("proj.b", proj_b);
    fn("embed", embed);
    fn("res1a.w", res1a_w);
    fn("res1a.b", res1a_b);
    fn("res1b.w", res1b_w);
    fn("res1b.b", res1b_b);
    fn("res2a.w", res2a_w);
    fn("res2a.b", res2a_b);
    fn("res2b.w", res2b_w);
    fn("res2b.b", res2b_b);
    fn("down.w", down_w);
    fn("down.b", down_b);
}

nd::Var refine(nd::Graph& g, RefinerParams& p, nd::Var z, int index, bool frozen) {
    if (index < 0 || index >= p.m) throw std::out_of_range("refine: coefficient index out of range");
    nd::Var h = nd::add_channelwise(nd::conv3d(z, bind(g, p.proj_w, frozen), 1), bind(g, p.proj_b, frozen));
    // Index conditioning: one learned embedding row added channel-wise.
    nd::Var emb_row = nd::embedding_lookup(bind(g, p.embed, frozen), {index});
    nd::Var emb = nd::reshape(emb_row, {p.c_c});
    h = nd::add_channelwise(h, emb);

    const auto residual = [&](nd::Var x, nd::Tensor& wa, nd::Tensor& ba, nd::Tensor& wb, nd::Tensor& bb) {
        nd::Var a = nd::gelu(nd::add_channelwise(nd::conv3d(x, bind(g, wa, frozen), 1), bind(g, ba, frozen)));
        nd::Var b = nd::add_channelwise(nd::conv3d(a, bind(g, wb, frozen), 1), bind(g, bb, frozen));
        return nd::add(x, b);
    };
    h = residual(h, p.res1a_w, p.res1a_b, p.res1b_w, p.res1b_b);
    h = residual(h, p.res2a_w, p.res2a_b, p.res2b_w, p.res2b_b);
    return nd::gelu(nd::add_channelwise(nd::conv3d(h, bind(g, p.down_w, frozen), 2), bind(g, p.down_b, frozen)));
}

nd::Var fuse(nd::Graph& g, const std::vector<RefinedLatent>& latents) {
    (void)g;
    if (latents.empty()) throw std::invalid_argument("fuse: no latents");
    for (std::size_t i = 0; i < latents.size(); ++i) {
        if (latents[i].index != static_cast<int>(i))
            throw std::invalid_argument("fuse: latents must arrive ordered by coefficient index (got index " +
                                        std::to_string(latents[i].index) + " at position " + std::to_string(i) +
                                        ")");
        if (latents[i].value.shape() != latents[0].value.shape())
            throw std::invalid_argument("fuse: latent extents disagree across coefficient indices");
    }
    const auto& sh = latents[0].value.shape();
    if (sh.size() != 5 || sh[0] != 1) throw std::invalid_argument("fuse: latents must be (1, c_c, Hc, Wc, Dc)");
    const int c_c = sh[1], hc = sh[2], wc = sh[3], dc = sh[4];
    std::vector<nd::Var> blocks;
    blocks.reserve(latents.size());
    for (const RefinedLatent& rl : latents) {
        nd::Var grid = nd::reshape(rl.value, {c_c, hc, wc, dc});
        nd::Var tokens_last = nd::permute(grid, {1, 2, 3, 0});  // (Hc, Wc, Dc, c_c), D fastest token order
        blocks.push_back(nd::reshape(tokens_last, {hc * wc * dc, c_c}));
    }
    return nd::concat(blocks, 1);
}

}  // namespace gentract::enc
