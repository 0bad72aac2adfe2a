#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gentract/sh/volume.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::tract {

/// Normalization statistics computed from a training set: per-axis
/// coordinate bounds (mm) for streamlines and per-coefficient mean/std for
/// SH volumes.
struct ScalingStats {
    Vec3 coord_min = {0, 0, 0};
    Vec3 coord_max = {1, 1, 1};
    std::vector<double> coeff_mean;
    std::vector<double> coeff_std;
    std::string config_hash;

    static ScalingStats compute(const std::vector<const sh::SHVolume*>& volumes,
                                const std::vector<const Streamline*>& streamlines);
    void validate() const;

    nlohmann::json to_json() const;
    static ScalingStats from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static ScalingStats load(const std::string& path);
};

/// Per axis, x -> 2 (x - min) / (max - min) - 1. Coordinates outside the
/// training range map outside [-1, 1]; nothing is clamped.
Streamline minmax_scale(const Streamline& s, const ScalingStats& stats);
Streamline minmax_unscale(const Streamline& s, const ScalingStats& stats);

/// True when any scaled coordinate falls outside [-margin, margin].
bool out_of_bounds_scaled(const Streamline& scaled, double margin = 1.05);

/// Per coefficient channel, (x - mean) / std.
sh::SHVolume zscore_volume(const sh::SHVolume& v, const ScalingStats& stats);

}  // namespace gentract::tract
