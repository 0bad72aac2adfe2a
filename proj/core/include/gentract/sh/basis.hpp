#pragma once

#include <vector>

#include "gentract/geom.hpp"

namespace gentract::sh {

/// Unit vector on the sphere with polar/azimuth accessors.
struct Direction {
    Vec3 v;

    explicit Direction(const Vec3& raw);
    static Direction from_angles(double theta, double phi);
    Direction flipped() const { return Direction{{-v[0], -v[1], -v[2]}}; }
    double theta() const;
    double phi() const;
};

/// Real symmetric spherical-harmonic coefficients. Even degrees only,
/// ordered (l ascending even; k from -l to l within each degree):
///   index(l, k) = l (l + 1) / 2 + k
struct SHCoeffs {
    int l_max = 0;
    std::vector<double> values;

    SHCoeffs() = default;
    explicit SHCoeffs(int lmax);
    int count() const { return static_cast<int>(values.size()); }
    double& at(int l, int k);
    double at(int l, int k) const;
    static int index(int l, int k);
};

/// Coefficient count for an even band limit: (L+1)(L+2)/2.
int sh_count(int l_max);

/// One real symmetric basis function. Orthonormal under the sphere measure;
/// k < 0 pairs with cos(|k| phi), k > 0 with sin(k phi), k = 0 is zonal.
double real_sh_basis(int l, int k, const Direction& dir);

/// All basis values at one direction, in coefficient order.
std::vector<double> sh_basis_row(int l_max, const Direction& dir);

double eval_fodf(const SHCoeffs& c, const Direction& dir);

struct SphereSample {
    Direction dir;
    double amplitude;
};

/// Least-squares fit; throws if the sample count is below the coefficient
/// count or the design matrix condition number exceeds 1e6 (reported in the
/// message).
SHCoeffs fit_sh(const std::vector<SphereSample>& samples, int l_max);

/// Band-limited antipodally symmetric delta at +-dir.
SHCoeffs peak_to_sh(const Direction& dir, int l_max);

/// Coefficients of f composed with the inverse rotation, computed by
/// evaluating on pre-rotated spread directions and refitting. Exact within
/// the band limit. R must be a proper rotation (checked to 1e-9).
SHCoeffs rotate_sh(const SHCoeffs& c, const Mat3& rotation);

/// The matrix of rotate_sh as a linear operator on coefficient vectors
/// (column j is rotate_sh applied to basis vector j).
std::vector<double> sh_rotation_operator(int l_max, const Mat3& rotation);

/// Deterministic golden-angle spiral covering the sphere; well spread for
/// any count >= 2.
std::vector<Direction> fibonacci_directions(int count);

}  // namespace gentract::sh
