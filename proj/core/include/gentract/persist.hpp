#pragma once

#include <string>
#include <vector>

#include "gentract/enc/refiner.hpp"
#include "gentract/enc/vae.hpp"
#include "gentract/gen/model.hpp"
#include "gentract/gen/train.hpp"
#include "gentract/nd/adam.hpp"
#include "gentract/nd/checkpoint.hpp"

namespace gentract {

/// Stage-1 container: one VAE per coefficient channel under "vae<i>.".
nd::Checkpoint pack_vaes(std::vector<enc::VaeParams>& vaes, const enc::EncoderConfig& cfg,
                         nlohmann::json meta);
std::vector<enc::VaeParams> unpack_vaes(const nd::Checkpoint& ckpt, const enc::EncoderConfig& cfg);

/// Stage-2 container: refiner + generator parameters plus optimizer
/// moments ("opt.m.", "opt.v.") for exact resume.
nd::Checkpoint pack_stage2(enc::RefinerParams& refiner, gen::GeneratorParams& generator, nd::Adam* opt,
                           nlohmann::json meta);
void unpack_stage2(const nd::Checkpoint& ckpt, enc::RefinerParams& refiner, gen::GeneratorParams& generator,
                   nd::Adam* opt);

}  // namespace gentract
