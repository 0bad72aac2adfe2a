#include "gentract/sh/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gentract::sh {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_even(int l_max) {
    if (l_max < 0 || l_max % 2 != 0)
        throw std::invalid_argument("band limit must be even and nonnegative, got " + std::to_string(l_max));
}

// Orthonormalization factor sqrt((2l+1)/(4 pi) (l-k)!/(l+k)!).
double norm_factor(int l, int k) {
    double ratio = 1.0;
    for (int i = l - k + 1; i <= l + k; ++i) ratio *= i;
    return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) / ratio);
}

Eigen::MatrixXd design_matrix(const std::vector<Direction>& dirs, int l_max) {
    const int m = sh_count(l_max);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(dirs.size()), m);
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        const std::vector<double> row = sh_basis_row(l_max, dirs[s]);
        for (int j = 0; j < m; ++j) a(static_cast<Eigen::Index>(s), j) = row[static_cast<std::size_t>(j)];
    }
    return a;
}

void check_rotation(const Mat3& r) {
    const Mat3 rrt = mat3_mul(r, mat3_transpose(r));
    const Mat3 eye = mat3_identity();
    for (int i = 0; i < 9; ++i)
        if (std::abs(rrt[i] - eye[i]) > 1e-9)
            throw std::invalid_argument("rotate_sh: matrix is not orthogonal");
    if (std::abs(mat3_det(r) - 1.0) > 1e-9)
        throw std::invalid_argument("rotate_sh: matrix determinant is not +1");
}

}  // namespace

Direction::Direction(const Vec3& raw) : v(raw) {
    const double n = norm(raw);
    if (std::abs(n - 1.0) > 1e-12) {
        if (n == 0.0) throw std::invalid_argument("direction cannot be the zero vector");
        v = (1.0 / n) * raw;
    }
}

Direction Direction::from_angles(double theta, double phi) {
    const double st = std::sin(theta);
    return Direction{{st * std::cos(phi), st * std::sin(phi), std::cos(theta)}};
}

double Direction::theta() const { return std::acos(std::clamp(v[2], -1.0, 1.0)); }
double Direction::phi() const {
    const double p = std::atan2(v[1], v[0]);
    return p < 0.0 ? p + 2.0 * kPi : p;
}

SHCoeffs::SHCoeffs(int lmax) : l_max(lmax) {
    require_even(lmax);
    values.assign(static_cast<std::size_t>(sh_count(lmax)), 0.0);
}

int SHCoeffs::index(int l, int k) { return l * (l + 1) / 2 + k; }

double& SHCoeffs::at(int l, int k) { return values[static_cast<std::size_t>(index(l, k))]; }
double SHCoeffs::at(int l, int k) const { return values[static_cast<std::size_t>(index(l, k))]; }

int sh_count(int l_max) {
    require_even(l_max);
    return (l_max + 1) * (l_max + 2) / 2;
}

double real_sh_basis(int l, int k, const Direction& dir) {
    if (l < 0 || l % 2 != 0 || std::abs(k) > l)
        throw std::invalid_argument("invalid (l, k) = (" + std::to_string(l) + ", " + std::to_string(k) + ")");
    const int ka = std::abs(k);
    const double x = std::clamp(dir.v[2], -1.0, 1.0);
    const double p = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(ka), x);
    const double nf = norm_factor(l, ka);
    if (k == 0) return nf * p;
    const double phi = std::atan2(dir.v[1], dir.v[0]);
    const double sqrt2 = 1.41421356237309504880;
    if (k < 0) return sqrt2 * nf * p * std::cos(ka * phi);
    return sqrt2 * nf * p * std::sin(ka * phi);
}

std::vector<double> sh_basis_row(int l_max, const Direction& dir) {
    require_even(l_max);
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(sh_count(l_max)));
    for (int l = 0; l <= l_max; l += 2)
        for (int k = -l; k <= l; ++k) row.push_back(real_sh_basis(l, k, dir));
    return row;
}

double eval_fodf(const SHCoeffs& c, const Direction& dir) {
    const std::vector<double> row = sh_basis_row(c.l_max, dir);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += c.values[j] * row[j];
    return acc;
}

SHCoeffs fit_sh(const std::vector<SphereSample>& samples, int l_max) {
    const int m = sh_count(l_max);
    if (static_cast<int>(samples.size()) < m)
        throw std::invalid_argument("fit_sh: " + std::to_string(samples.size()) + " samples for " +
                                    std::to_string(m) + " coefficients (underdetermined)");
    std::vector<Direction> dirs;
    dirs.reserve(samples.size());
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t s = 0; s < samples.size(); ++s) {
        dirs.push_back(samples[s].dir);
        y(static_cast<Eigen::Index>(s)) = samples[s].amplitude;
    }
    const Eigen::MatrixXd a = design_matrix(dirs, l_max);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(cond < 1e6))
        throw std::runtime_error("fit_sh: ill-conditioned design matrix, condition number " +
                                 std::to_string(cond));
    const Eigen::VectorXd c = svd.solve(y);
    SHCoeffs out(l_max);
    for (int j = 0; j < m; ++j) out.values[static_cast<std::size_t>(j)] = c(j);
    return out;
}

SHCoeffs peak_to_sh(const Direction& dir, int l_max) {
    SHCoeffs out(l_max);
    const Direction flip = dir.flipped();
    int j = 0;
    for (int l = 0; l <= l_max; l += 2)
        for (int k = -l; k <= l; ++k, ++j)
            out.values[static_cast<std::size_t>(j)] =
                0.5 * (real_sh_basis(l, k, dir) + real_sh_basis(l, k, flip));
    return out;
}

SHCoeffs rotate_sh(const SHCoeffs& c, const Mat3& rotation) {
    check_rotation(rotation);
    const int m = c.count();
    const Mat3 rt = mat3_transpose(rotation);
    const std::vector<Direction> dirs = fibonacci_directions(std::max(2 * m, 64));
    std::vector<SphereSample> samples;
    samples.reserve(dirs.size());
    for (const Direction& d : dirs)
        samples.push_back({d, eval_fodf(c, Direction{mat3_apply(rt, d.v)})});
    return fit_sh(samples, c.l_max);
}

std::vector<double> sh_rotation_operator(int l_max, const Mat3& rotation) {
    check_rotation(rotation);
    const int m = sh_count(l_max);
    const Mat3 rt = mat3_transpose(rotation);
    const std::vector<Direction> dirs = fibonacci_directions(std::max(2 * m, 64));
    const Eigen::MatrixXd a = design_matrix(dirs, l_max);
    std::vector<Direction> pre;
    pre.reserve(dirs.size());
    for (const Direction& d : dirs) pre.push_back(Direction{mat3_apply(rt, d.v)});
    const Eigen::MatrixXd a_rot = design_matrix(pre, l_max);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd op = svd.solve(a_rot);
    std::vector<double> out(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] = op(i, j);
    return out;
}

std::vector<Direction> fibonacci_directions(int count) {
    if (count < 2) throw std::invalid_argument("fibonacci_directions: count must be >= 2");
    std::vector<Direction> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        dirs.push_back(Direction{{r * std::cos(phi), r * std::sin(phi), z}});
    }
    return dirs;
}

}  // namespace gentract::sh
