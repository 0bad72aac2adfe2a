#include "gentract/enc/train_vae.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gentract/nd/adam.hpp"

namespace gentract::enc {

VaeTrainResult train_vaes(const std::vector<const sh::SHVolume*>& volumes, const EncoderConfig& cfg,
                          std::uint64_t seed) {
    if (volumes.empty()) throw std::invalid_argument("train_vaes: empty dataset");
    const int m = volumes.front()->m();
    for (const sh::SHVolume* v : volumes)
        if (v->m() != m) throw std::invalid_argument("train_vaes: volumes disagree on coefficient count");

    VaeTrainResult result;
    result.vaes.reserve(static_cast<std::size_t>(m));
    result.loss_curves.resize(static_cast<std::size_t>(m));

    for (int ch = 0; ch < m; ++ch) {
        nd::Rng init_rng(seed, static_cast<std::uint64_t>(ch));
        VaeParams vae = VaeParams::init(cfg, init_rng);
        std::vector<nd::Tensor*> params;
        vae.visit([&](const std::string&, nd::Tensor& t) { params.push_back(&t); });
        nd::Adam opt(params, nd::AdamConfig{cfg.vae_lr, 0.9, 0.999, 1e-8});

        // All channel tensors up front; volumes are shared read-only.
        std::vector<nd::Tensor> channel;
        channel.reserve(volumes.size());
        for (const sh::SHVolume* v : volumes) channel.push_back(volume_channel(*v, ch));

        nd::Rng rng(seed, static_cast<std::uint64_t>(ch) + 0x10000u);
        const int batch = std::min<int>(cfg.vae_batch, static_cast<int>(volumes.size()));
        for (int step = 0; step < cfg.vae_steps; ++step) {
            nd::Graph g;
            double loss_val = 0.0;
            // One graph per batch item keeps activations small; gradients
            // accumulate across items through shared parameter nodes.
            std::vector<nd::Var> losses;
            for (int bi = 0; bi < batch; ++bi) {
                const int vi = rng.uniform_int(static_cast<int>(channel.size()));
                nd::Var x = g.input(channel[static_cast<std::size_t>(vi)]);
                VaeEncodeOut enc = vae_encode(g, vae, x, false);
                nd::Tensor eta(enc.mu.shape());
                for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = rng.normal();
                nd::Var z = vae_sample(g, enc.mu, enc.logvar, eta);
                nd::Var recon = vae_decode(g, vae, z, false);
                losses.push_back(vae_loss(g, x, recon, enc.mu, enc.logvar, cfg.beta));
            }
            nd::Var loss = losses[0];
            for (std::size_t i = 1; i < losses.size(); ++i) loss = nd::add(loss, losses[i]);
            loss = nd::scale(loss, 1.0 / static_cast<double>(losses.size()));
            loss_val = loss.value().item();
            if (!std::isfinite(loss_val))
                throw std::runtime_error("train_vaes: loss diverged to NaN on channel " + std::to_string(ch) +
                                         " at step " + std::to_string(step));
            opt.step(g.backward(loss));
            result.loss_curves[static_cast<std::size_t>(ch)].emplace_back(step, loss_val);
        }
        result.vaes.push_back(std::move(vae));
    }
    return result;
}

}  // namespace gentract::enc
