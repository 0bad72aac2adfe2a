#pragma once

#include <utility>

#include "gentract/sh/volume.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::tract {

enum class Axis { X, Y, Z };

Axis axis_from_char(char c);

/// Rotates streamline points about the volume's world center and resamples
/// the volume onto its own grid from the rotated world coordinates, with
/// per-voxel SH reorientation so fODF peaks keep tracking the rotated
/// tangents.
std::pair<sh::SHVolume, Tractogram> rotate_pair(const sh::SHVolume& v, const Tractogram& t,
                                                double angle_rad, Axis axis);

}  // namespace gentract::tract
