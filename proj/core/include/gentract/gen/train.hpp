#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gentract/data/dataset.hpp"
#include "gentract/enc/refiner.hpp"
#include "gentract/enc/vae.hpp"
#include "gentract/gen/model.hpp"
#include "gentract/gen/schedule.hpp"
#include "gentract/nd/adam.hpp"

namespace gentract::gen {

struct TrainDivergence : std::runtime_error {
    int step;
    explicit TrainDivergence(int s)
        : std::runtime_error("training loss diverged to NaN at step " + std::to_string(s)), step(s) {}
};

/// Fixed parameter order shared by the optimizer and checkpoints: refiner
/// tensors first, then generator tensors, each in visit order.
struct ParamList {
    std::vector<std::string> names;
    std::vector<nd::Tensor*> tensors;
};
ParamList stage2_params(enc::RefinerParams& refiner, GeneratorParams& gen);

/// Per-subject frozen VAE latent means, one (1, c_z, hz, wz, dz) tensor per
/// coefficient channel.
std::vector<std::vector<nd::Tensor>> precompute_latents(std::vector<enc::VaeParams>& vaes,
                                                        const data::TrainingDataset& dataset);

/// Builds the conditioning token matrix for one subject inside a graph
/// (refiner trainable unless frozen) and projects it to the embedding
/// width: returns a (1, tok, n) Var.
nd::Var build_context(nd::Graph& g, enc::RefinerParams& refiner, GeneratorParams& gen,
                      const std::vector<nd::Tensor>& latents, bool frozen);

struct Stage2Options {
    double lr = 1e-3;
    int batch = 32;
    int steps = 2000;
    std::uint64_t seed = 0;
    int start_step = 0;  // resume point
};

/// Joint stage-2 optimization of the refiner and generator (VAEs frozen).
/// Batches mix subjects; every step's randomness is derived from
/// (seed, step), so resumed runs reproduce uninterrupted ones. `on_step`
/// fires after every optimizer step with (step, loss). Throws
/// TrainDivergence on NaN loss.
void train_generator(const data::TrainingDataset& dataset, std::vector<enc::VaeParams>& vaes,
                     enc::RefinerParams& refiner, GeneratorParams& gen, const NoiseSchedule* schedule,
                     const Stage2Options& opts, nd::Adam& optimizer,
                     const std::function<void(int, double)>& on_step);

}  // namespace gentract::gen
