#pragma once

#include <string>

#include "gentract/tract/streamline.hpp"

namespace gentract::tract {

/// TrackVis TRK version 2.
///
/// 1000-byte little-endian header ("TRACK\0" magic, dims, voxel sizes,
/// voxel-to-world affine at offset 440, n_count at 988), then per
/// streamline an i32 point count followed by f32 point triplets in
/// voxel-mm convention ((index + 0.5) * voxel_size). Files this writer
/// produced re-serialize byte-identically after a read.
void write_trk(const Tractogram& t, const std::string& path);
Tractogram read_trk(const std::string& path);

}  // namespace gentract::tract
