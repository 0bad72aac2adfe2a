#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gentract/sh/volume.hpp"
#include "gentract/tract/streamline.hpp"

namespace gentract::sh {

/// Analytic bundle description: streamlines are sampled inside a tube of
/// the given radius around a Catmull-Rom centerline through the control
/// points.
struct BundleSpec {
    std::string name;
    std::vector<Vec3> control_points_mm;
    double radius_mm = 2.0;
    int streamline_count = 100;
    int points_per_streamline = 32;
};

struct PhantomSpec {
    int extents[3] = {32, 32, 32};
    double voxel_size_mm = 2.0;
    int l_max = 2;
    std::uint64_t seed = 0;
    std::vector<BundleSpec> bundles;

    void validate() const;
    nlohmann::json to_json() const;
    static PhantomSpec from_json(const nlohmann::json& j);
    static PhantomSpec load(const std::string& path);
};

struct EndpointRegion {
    Vec3 center_mm = {0, 0, 0};
    double radius_mm = 0.0;

    bool contains(const Vec3& p) const { return norm(p - center_mm) <= radius_mm; }
};

struct GroundTruthBundle {
    std::string name;
    std::vector<tract::Streamline> streamlines;
    tract::Streamline centroid;
    EndpointRegion endpoints[2];
};

struct GroundTruth {
    double voxel_size_mm = 1.0;
    std::vector<GroundTruthBundle> bundles;

    std::size_t total_streamlines() const;
    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static GroundTruth load(const std::string& path);
};

struct PhantomResult {
    SHVolume volume;
    GroundTruth ground_truth;
};

/// Synthesizes the bundle streamlines, rasterizes per-voxel fODFs from the
/// segment tangents (mean of band-limited deltas, scaled to unit
/// single-fiber peak), and fills untouched voxels with 0.1 x the isotropic
/// coefficient vector. Deterministic given the spec seed.
PhantomResult make_phantom(const PhantomSpec& spec);

}  // namespace gentract::sh
