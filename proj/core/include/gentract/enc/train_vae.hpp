#pragma once

#include <cstdint>
#include <vector>

#include "gentract/enc/vae.hpp"

namespace gentract::enc {

struct VaeTrainResult {
    std::vector<VaeParams> vaes;  // one per coefficient channel
    /// Loss curves: per channel, one (step, loss) row per step.
    std::vector<std::vector<std::pair<int, double>>> loss_curves;
};

/// Stage-1 training: one VAE per coefficient channel, each optimized with
/// reconstruction + KL over the (already normalized) volumes. Deterministic
/// given the seed. Throws on NaN divergence with the failing channel and
/// step in the message.
VaeTrainResult train_vaes(const std::vector<const sh::SHVolume*>& volumes, const EncoderConfig& cfg,
                          std::uint64_t seed);

}  // namespace gentract::enc
