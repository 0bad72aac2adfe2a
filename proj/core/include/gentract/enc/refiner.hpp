#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gentract/enc/vae.hpp"
#include "gentract/nd/graph.hpp"

namespace gentract::enc {

/// Shared class-conditioned refiner: a 1x1x1 projection with a per-index
/// channel embedding, two residual conv blocks, then a stride-2 reduction.
/// One weight set serves all m coefficient indices.
struct RefinerParams {
    int m = 0;  // embedding rows
    int c_c = 8;
    nd::Tensor proj_w, proj_b;
    nd::Tensor embed;  // (m, c_c)
    nd::Tensor res1a_w, res1a_b, res1b_w, res1b_b;
    nd::Tensor res2a_w, res2a_b, res2b_w, res2b_b;
    nd::Tensor down_w, down_b;

    static RefinerParams init(const EncoderConfig& cfg, int m, nd::Rng& rng);
    void visit(const std::function<void(const std::string&, nd::Tensor&)>& fn);
};

/// z: (1, c_z, Hz, Wz, Dz) -> (1, c_c, Hz/2, Wz/2, Dz/2).
nd::Var refine(nd::Graph& g, RefinerParams& p, nd::Var z, int index, bool frozen);

struct RefinedLatent {
    int index;
    nd::Var value;  // (1, c_c, Hc, Wc, Dc)
};

/// Flattens spatial axes (D fastest) and concatenates channel blocks by
/// ascending coefficient index: m latents (1, c_c, Hc, Wc, Dc) ->
/// (Hc * Wc * Dc, m * c_c). Inputs must arrive index-tagged 0..m-1 in order.
nd::Var fuse(nd::Graph& g, const std::vector<RefinedLatent>& latents);

}  // namespace gentract::enc
