#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace gentract {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;    // row-major
using Affine = std::array<double, 16>; // row-major 4x4, maps grid indices to world mm

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    if (n == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
    return (1.0 / n) * a;
}

inline Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

inline Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[3 * i + j] += a[3 * i + k] * b[3 * k + j];
    return c;
}

inline Mat3 mat3_transpose(const Mat3& m) {
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

inline Mat3 mat3_identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

inline double mat3_det(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

/// Rodrigues rotation about a unit axis.
inline Mat3 rotation_about(const Vec3& axis_unit, double angle_rad) {
    const Vec3 u = axis_unit;
    const double c = std::cos(angle_rad), s = std::sin(angle_rad), t = 1.0 - c;
    return {c + u[0] * u[0] * t,        u[0] * u[1] * t - u[2] * s, u[0] * u[2] * t + u[1] * s,
            u[1] * u[0] * t + u[2] * s, c + u[1] * u[1] * t,        u[1] * u[2] * t - u[0] * s,
            u[2] * u[0] * t - u[1] * s, u[2] * u[1] * t + u[0] * s, c + u[2] * u[2] * t};
}

inline Vec3 affine_apply(const Affine& a, const Vec3& v) {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2] + a[3],
            a[4] * v[0] + a[5] * v[1] + a[6] * v[2] + a[7],
            a[8] * v[0] + a[9] * v[1] + a[10] * v[2] + a[11]};
}

inline Mat3 affine_linear(const Affine& a) {
    return {a[0], a[1], a[2], a[4], a[5], a[6], a[8], a[9], a[10]};
}

inline Affine affine_inverse(const Affine& a) {
    const Mat3 m = affine_linear(a);
    const double det = mat3_det(m);
    if (std::abs(det) < 1e-30) throw std::invalid_argument("affine is not invertible");
    const double id = 1.0 / det;
    Mat3 inv = {(m[4] * m[8] - m[5] * m[7]) * id, (m[2] * m[7] - m[1] * m[8]) * id, (m[1] * m[5] - m[2] * m[4]) * id,
                (m[5] * m[6] - m[3] * m[8]) * id, (m[0] * m[8] - m[2] * m[6]) * id, (m[2] * m[3] - m[0] * m[5]) * id,
                (m[3] * m[7] - m[4] * m[6]) * id, (m[1] * m[6] - m[0] * m[7]) * id, (m[0] * m[4] - m[1] * m[3]) * id};
    const Vec3 t = {a[3], a[7], a[11]};
    const Vec3 ti = mat3_apply(inv, t);
    return {inv[0], inv[1], inv[2], -ti[0], inv[3], inv[4], inv[5], -ti[1],
            inv[6], inv[7], inv[8], -ti[2], 0,      0,      0,      1};
}

}  // namespace gentract
