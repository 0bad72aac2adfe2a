#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gentract/nd/graph.hpp"
#include "gentract/nd/ops.hpp"
#include "gentract/nd/rng.hpp"
#include "gentract/sh/volume.hpp"

namespace gentract::enc {

/// Architecture knobs shared by the per-coefficient VAEs and the refiner.
struct EncoderConfig {
    int enc_ch1 = 8;   // channels after the first strided block
    int enc_ch2 = 16;  // channels after the second strided block
    int c_z = 4;       // VAE latent channels
    int c_c = 8;       // refiner output channels
    double beta = 1e-3;
    double vae_lr = 2e-3;
    int vae_steps = 400;
    int vae_batch = 2;
};

/// One coefficient channel's VAE: two stride-2 conv blocks down to
/// (c_z, H/4, W/4, D/4), mirrored decoder with nearest-neighbour
/// upsampling. Fully convolutional, so other extents divisible by 4 work
/// too.
struct VaeParams {
    int c_z = 4;
    nd::Tensor enc1_w, enc1_b, enc2_w, enc2_b;
    nd::Tensor mu_w, mu_b, logvar_w, logvar_b;
    nd::Tensor dec1_w, dec1_b, dec2_w, dec2_b, dec3_w, dec3_b;

    static VaeParams init(const EncoderConfig& cfg, nd::Rng& rng);
    void visit(const std::function<void(const std::string&, nd::Tensor&)>& fn);
};

struct VaeEncodeOut {
    nd::Var mu, logvar;
};

/// x: (N, 1, H, W, D) -> mu/logvar (N, c_z, H/4, W/4, D/4). `frozen` binds
/// weights as constants instead of trainable parameters.
VaeEncodeOut vae_encode(nd::Graph& g, VaeParams& p, nd::Var x, bool frozen);

/// Reparameterized draw mu + exp(logvar / 2) * eta with eta provided as a
/// constant tensor (N(0, I) from the caller's rng).
nd::Var vae_sample(nd::Graph& g, nd::Var mu, nd::Var logvar, const nd::Tensor& eta);

nd::Var vae_decode(nd::Graph& g, VaeParams& p, nd::Var z, bool frozen);

/// MSE(x, recon) + beta * KL(N(mu, diag exp logvar) || N(0, I)), both terms
/// averaged per element.
nd::Var vae_loss(nd::Graph& g, nd::Var x, nd::Var recon, nd::Var mu, nd::Var logvar, double beta);

/// Deterministic latent summary used by stage 2: the encoder mean for one
/// coefficient channel of a (z-scored) volume, as a (1, c_z, hz, wz, dz)
/// tensor.
nd::Tensor vae_latent_mean(VaeParams& p, const sh::SHVolume& volume, int channel);

/// Extracts coefficient channel `i` as a (1, 1, H, W, D) tensor.
nd::Tensor volume_channel(const sh::SHVolume& v, int channel);

}  // namespace gentract::enc
