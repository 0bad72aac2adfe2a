#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gentract/geom.hpp"
#include "gentract/sh/basis.hpp"

namespace gentract::sh {

/// 4D grid of SH coefficients: extents H x W x D, m coefficients per voxel,
/// stored coefficient-fastest. The affine maps voxel indices (voxel-center
/// convention) to world millimeters.
struct SHVolume {
    int h = 0, w = 0, d = 0;
    int l_max = 0;
    double voxel_size = 1.0;  // isotropic, mm
    Affine affine = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    std::vector<double> data;  // h * w * d * m

    SHVolume() = default;
    SHVolume(int h, int w, int d, int l_max, double voxel_size);

    int m() const { return sh_count(l_max); }
    std::int64_t voxel_count() const { return static_cast<std::int64_t>(h) * w * d; }
    std::int64_t offset(int i, int j, int k) const {
        return ((static_cast<std::int64_t>(i) * w + j) * d + k) * m();
    }
    double* voxel(int i, int j, int k) { return data.data() + offset(i, j, k); }
    const double* voxel(int i, int j, int k) const { return data.data() + offset(i, j, k); }

    Vec3 index_to_world(const Vec3& ijk) const { return affine_apply(affine, ijk); }
    Vec3 world_to_index(const Vec3& xyz) const { return affine_apply(affine_inverse(affine), xyz); }
    Vec3 world_center() const;

    /// Trilinear interpolation of all m coefficients at a continuous index;
    /// out-of-range positions clamp to the boundary.
    void sample_index(const Vec3& ijk, double* out) const;
};

/// SHV container: magic "SHVOL1\0\0", little-endian u32 H, W, D, m, u32
/// L_max, f64 voxel size, 16 x f64 row-major affine, then coefficients as
/// f64, coefficient-fastest. Bit-exact round trip.
void write_shv(const SHVolume& v, const std::string& path);
SHVolume read_shv(const std::string& path);

/// Resamples fODF amplitudes on spread directions, applies magnitude noise
/// sqrt((a + n1)^2 + n2^2) with n ~ N(0, sigma^2), and refits per voxel.
/// Amplitudes are clamped to >= 0 before corruption. Deterministic given
/// the seed for any worker count.
SHVolume rician_corrupt(const SHVolume& v, double sigma, int n_dirs, std::uint64_t seed);

/// Trilinear resampling onto a coarser grid (target >= source voxel size),
/// centered on the same world region.
SHVolume downsample(const SHVolume& v, double target_voxel_size);

}  // namespace gentract::sh
