#include "gentract/enc/vae.hpp"

#include <cmath>
#include <stdexcept>

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

VaeParams VaeParams::init(const EncoderConfig& cfg, nd::Rng& rng) {
    VaeParams p;
    p.c_z = cfg.c_z;
    p.enc1_w = conv_init(cfg.enc_ch1, 1, 3, rng);
    p.enc1_b = nd::Tensor::zeros({cfg.enc_ch1});
    p.enc2_w = conv_init(cfg.enc_ch2, cfg.enc_ch1, 3, rng);
    p.enc2_b = nd::Tensor::zeros({cfg.enc_ch2});
    p.mu_w = conv_init(cfg.c_z, cfg.enc_ch2, 1, rng);
    p.mu_b = nd::Tensor::zeros({cfg.c_z});
    p.logvar_w = conv_init(cfg.c_z, cfg.enc_ch2, 1, rng);
    p.logvar_b = nd::Tensor::zeros({cfg.c_z});
    p.dec1_w = conv_init(cfg.enc_ch2, cfg.c_z, 3, rng);
    p.dec1_b = nd::Tensor::zeros({cfg.enc_ch2});
    p.dec2_w = conv_init(cfg.enc_ch1, cfg.enc_ch2, 3, rng);
    p.dec2_b = nd::Tensor::zeros({cfg.enc_ch1});
    p.dec3_w = conv_init(1, cfg.enc_ch1, 3, rng);
    p.dec3_b = nd::Tensor::zeros({1});
    return p;
}

void VaeParams::visit(const std::function<void(const std::string&, nd::Tensor&)>& fn) {
    fn("enc1.w", enc1_w);
    fn("enc1.b", enc1_b);
    fn("enc2.w", enc2_w);
    fn("enc2.b", enc2_b);
    fn("mu.w", mu_w);
    fn("mu.b", mu_b);
    fn("logvar.w", logvar_w);
    fn("logvar.b", logvar_b);
    fn("dec1.w", dec1_w);
    fn("dec1.b", dec1_b);
    fn("dec2.w", dec2_w);
    fn("dec2.b", dec2_b);
    fn("dec3.w", dec3_w);
    fn("dec3.b", dec3_b);
}

VaeEncodeOut vae_encode(nd::Graph& g, VaeParams& p, nd::Var x, bool frozen) {
    if (x.shape().size() != 5 || x.shape()[1] != 1)
        throw std::invalid_argument("vae_encode: input must be (N, 1, H, W, D)");
    nd::Var h1 = nd::gelu(nd::add_channelwise(nd::conv3d(x, bind(g, p.enc1_w, frozen), 2), bind(g, p.enc1_b, frozen)));
    nd::Var h2 = nd::gelu(nd::add_channelwise(nd::conv3d(h1, bind(g, p.enc2_w, frozen), 2), bind(g, p.enc2_b, frozen)));
    nd::Var mu = nd::add_channelwise(nd::conv3d(h2, bind(g, p.mu_w, frozen), 1), bind(g, p.mu_b, frozen));
    nd::Var logvar =
        nd::add_channelwise(nd::conv3d(h2, bind(g, p.logvar_w, frozen), 1), bind(g, p.logvar_b, frozen));
    return {mu, logvar};
}

nd::Var vae_sample(nd::Graph& g, nd::Var mu, nd::Var logvar, const nd::Tensor& eta) {
    if (eta.shape() != mu.shape()) throw std::invalid_argument("vae_sample: eta shape mismatch");
    nd::Var noise = g.input(eta);
    nd::Var std_dev = nd::exp_op(nd::scale(logvar, 0.5));
    return nd::add(mu, nd::mul(std_dev, noise));
}

nd::Var vae_decode(nd::Graph& g, VaeParams& p, nd::Var z, bool frozen) {
    nd::Var h1 = nd::gelu(nd::add_channelwise(nd::conv3d(z, bind(g, p.dec1_w, frozen), 1), bind(g, p.dec1_b, frozen)));
    nd::Var u1 = nd::upsample_nearest3d(h1, 2);
    nd::Var h2 = nd::gelu(nd::add_channelwise(nd::conv3d(u1, bind(g, p.dec2_w, frozen), 1), bind(g, p.dec2_b, frozen)));
    nd::Var u2 = nd::upsample_nearest3d(h2, 2);
    return nd::add_channelwise(nd::conv3d(u2, bind(g, p.dec3_w, frozen), 1), bind(g, p.dec3_b, frozen));
}

nd::Var vae_loss(nd::Graph& g, nd::Var x, nd::Var recon, nd::Var mu, nd::Var logvar, double beta) {
    (void)g;
    nd::Var diff = nd::sub(recon, x);
    nd::Var mse = nd::mean_all(nd::mul(diff, diff));
    // Per-element KL against the unit normal: 0.5 (mu^2 + e^lv - 1 - lv).
    nd::Var kl_el = nd::add_scalar(nd::sub(nd::add(nd::mul(mu, mu), nd::exp_op(logvar)), logvar), -1.0);
    nd::Var kl = nd::scale(nd::mean_all(kl_el), 0.5);
    return nd::add(mse, nd::scale(kl, beta));
}

nd::Tensor volume_channel(const sh::SHVolume& v, int channel) {
    if (channel < 0 || channel >= v.m()) throw std::out_of_range("volume_channel: channel out of range");
    nd::Tensor out({1, 1, v.h, v.w, v.d});
    const int m = v.m();
    for (std::int64_t i = 0; i < v.voxel_count(); ++i) out[i] = v.data[i * m + channel];
    return out;
}

nd::Tensor vae_latent_mean(VaeParams& p, const sh::SHVolume& volume, int channel) {
    nd::Graph g;
    nd::Var x = g.input(volume_channel(volume, channel));
    VaeEncodeOut out = vae_encode(g, p, x, /*frozen=*/true);
    return out.mu.value();
}

}  // namespace gentract::enc
