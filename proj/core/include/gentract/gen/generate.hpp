#pragma once

#include <cstdint>

#include "gentract/enc/refiner.hpp"
#include "gentract/enc/vae.hpp"
#include "gentract/gen/model.hpp"
#include "gentract/gen/schedule.hpp"
#include "gentract/tract/scaling.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::gen {

struct GenerateOptions {
    int count = 500;
    int batch_size = 64;
    int steps = 10;
    std::uint64_t seed = 0;
};

struct GenerateOutput {
    tract::Tractogram tractogram;
    double wall_seconds = 0.0;
};

/// Whole-tractogram inference: the conditioning tensor is computed once for
/// the volume, then streamlines are sampled from noise in batches. Each
/// streamline's initial noise derives from (seed, streamline index), so the
/// collated output is independent of the batch partition.
GenerateOutput generate_tractogram(const sh::SHVolume& raw_volume, const tract::ScalingStats& stats,
                                   std::vector<enc::VaeParams>& vaes, enc::RefinerParams& refiner,
                                   GeneratorParams& gen, const NoiseSchedule* schedule,
                                   const GenerateOptions& opts);

}  // namespace gentract::gen
