#pragma once

#include <utility>
#include <vector>

#include "gentract/nd/tensor.hpp"
#include "gentract/sh/volume.hpp"
#include "gentract/tract/scaling.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::data {

struct Subject {
    sh::SHVolume volume;                  // z-scored
    std::vector<nd::Tensor> streamlines;  // (p, 3) each: canonicalized, resampled, min-max scaled
};

struct TrainingDataset {
    tract::ScalingStats stats;
    std::vector<Subject> subjects;
    int points = 32;

    std::size_t total_streamlines() const;
    /// Flattened (subject, streamline) lookup for a global index.
    std::pair<int, int> locate(std::size_t global_index) const;
};

struct AugmentSpec {
    std::vector<double> rotations_deg;  // e.g. {-45, -30, -15, 15, 30, 45}
    std::vector<char> axes;             // e.g. {'z'}
};

/// Builds the training set: optional rotation augmentation (every
/// angle x axis combination appended as a new subject), normalization
/// statistics from the augmented set (or the provided fixed stats), then
/// per-streamline canonicalization, arc-length resampling to `points`, and
/// min-max scaling.
TrainingDataset build_training_dataset(std::vector<std::pair<sh::SHVolume, tract::Tractogram>> pairs,
                                       int points, const AugmentSpec& augment,
                                       const tract::ScalingStats* fixed_stats = nullptr);

nd::Tensor streamline_to_tensor(const tract::Streamline& s);
tract::Streamline tensor_to_streamline(const nd::Tensor& t);

}  // namespace gentract::data
