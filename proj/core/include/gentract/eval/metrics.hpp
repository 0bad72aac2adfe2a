#pragma once

#include <string>
#include <vector>

#include "gentract/sh/phantom.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::eval {

/// Minimum direct-flip distance: mean pointwise Euclidean distance,
/// minimized over reversing one streamline. Requires equal point counts.
double mdf(const tract::Streamline& a, const tract::Streamline& b);

struct StreamlineVerdict {
    bool tp = false;
    std::string bundle;      // assigned bundle, empty when none
    double distance_mm = 0;  // MDF to the assigned centroid
};

struct FilterResult {
    std::vector<StreamlineVerdict> rows;
};

/// Assigns each streamline to the bundle with minimal MDF to its centroid
/// (after resampling to the centroid's point count). TP requires that
/// distance <= tau_mm and that the streamline's endpoints land in the
/// bundle's two endpoint regions, in either orientation. Streamlines
/// flagged out-of-bounds by the tractogram are FPs outright.
FilterResult filter_streamlines(const tract::Tractogram& t, const sh::GroundTruth& gt, double tau_mm);

double precision(const FilterResult& r);

/// Number of bundles populated by at least k TP streamlines.
int bundles_discovered(const FilterResult& r, const sh::GroundTruth& gt, int k);

}  // namespace gentract::eval
