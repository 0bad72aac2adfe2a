#pragma once

#include <cstdint>
#include <vector>

#include "gentract/geom.hpp"

namespace gentract::tract {

/// Ordered 3D points in world millimeters; valid streamlines have >= 2
/// finite points.
using Streamline = std::vector<Vec3>;

struct Tractogram {
    std::vector<Streamline> streamlines;
    int extents[3] = {0, 0, 0};
    double voxel_size = 1.0;
    Affine affine = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    /// Optional per-streamline out-of-bounds flags (empty when untracked).
    std::vector<std::uint8_t> out_of_bounds;
};

double polyline_length(const Streamline& s);

/// p points at equal arc-length spacing along the piecewise-linear curve;
/// first and last input points are preserved exactly.
Streamline resample_streamline(const Streamline& s, int p);

/// Flips the streamline when its last point precedes its first
/// lexicographically, so a curve and its reverse map to the same sequence.
Streamline canonicalize(const Streamline& s);

void validate_streamline(const Streamline& s);

}  // namespace gentract::tract
