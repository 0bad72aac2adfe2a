#include "gentract/sh/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gentract/nd/parallel.hpp"
#include "gentract/nd/rng.hpp"

namespace gentract::sh {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'V', 'O', 'L', '1', 0, 0};

static_assert(std::endian::native == std::endian::little, "SHV container assumes a little-endian host");

[[noreturn]] void corrupt(const std::string& path, const std::string& what, std::int64_t offset) {
    throw std::runtime_error("shv '" + path + "': " + what + " at byte offset " + std::to_string(offset));
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::ifstream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

SHVolume::SHVolume(int h_, int w_, int d_, int lmax, double vs) : h(h_), w(w_), d(d_), l_max(lmax), voxel_size(vs) {
    if (h < 1 || w < 1 || d < 1) throw std::invalid_argument("volume extents must be positive");
    if (vs <= 0.0) throw std::invalid_argument("voxel size must be positive");
    data.assign(static_cast<std::size_t>(voxel_count()) * static_cast<std::size_t>(m()), 0.0);
    // Voxel (0,0,0) centered at half a voxel, so the volume spans [0, extent * vs].
    affine = {vs, 0, 0, vs / 2, 0, vs, 0, vs / 2, 0, 0, vs, vs / 2, 0, 0, 0, 1};
}

Vec3 SHVolume::world_center() const {
    return index_to_world({(h - 1) / 2.0, (w - 1) / 2.0, (d - 1) / 2.0});
}

void SHVolume::sample_index(const Vec3& ijk, double* out) const {
    const int mm = m();
    const auto clampf = [](double x, int n) { return std::clamp(x, 0.0, static_cast<double>(n - 1)); };
    const double fi = clampf(ijk[0], h), fj = clampf(ijk[1], w), fk = clampf(ijk[2], d);
    const int i0 = std::min(static_cast<int>(fi), h - 1), j0 = std::min(static_cast<int>(fj), w - 1),
              k0 = std::min(static_cast<int>(fk), d - 1);
    const int i1 = std::min(i0 + 1, h - 1), j1 = std::min(j0 + 1, w - 1), k1 = std::min(k0 + 1, d - 1);
    const double ti = fi - i0, tj = fj - j0, tk = fk - k0;
    std::fill(out, out + mm, 0.0);
    const double wts[8] = {(1 - ti) * (1 - tj) * (1 - tk), (1 - ti) * (1 - tj) * tk,
                           (1 - ti) * tj * (1 - tk),       (1 - ti) * tj * tk,
                           ti * (1 - tj) * (1 - tk),       ti * (1 - tj) * tk,
                           ti * tj * (1 - tk),             ti * tj * tk};
    const int corners[8][3] = {{i0, j0, k0}, {i0, j0, k1}, {i0, j1, k0}, {i0, j1, k1},
                               {i1, j0, k0}, {i1, j0, k1}, {i1, j1, k0}, {i1, j1, k1}};
    for (int c = 0; c < 8; ++c) {
        if (wts[c] == 0.0) continue;
        const double* src = voxel(corners[c][0], corners[c][1], corners[c][2]);
        for (int q = 0; q < mm; ++q) out[q] += wts[c] * src[q];
    }
}

void write_shv(const SHVolume& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("shv: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, static_cast<std::uint32_t>(v.h));
    write_pod(out, static_cast<std::uint32_t>(v.w));
    write_pod(out, static_cast<std::uint32_t>(v.d));
    write_pod(out, static_cast<std::uint32_t>(v.m()));
    write_pod(out, static_cast<std::uint32_t>(v.l_max));
    write_pod(out, v.voxel_size);
    for (double a : v.affine) write_pod(out, a);
    out.write(reinterpret_cast<const char*>(v.data.data()),
              static_cast<std::streamsize>(v.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("shv: write to '" + path + "' failed");
}

SHVolume read_shv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("shv: cannot open '" + path + "'");
    char magic[8];
    if (!in.read(magic, sizeof(magic))) corrupt(path, "truncated magic", 0);
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) corrupt(path, "bad magic", 0);
    std::uint32_t h, w, d, m, l_max;
    double vs;
    if (!read_pod(in, h) || !read_pod(in, w) || !read_pod(in, d) || !read_pod(in, m) || !read_pod(in, l_max) ||
        !read_pod(in, vs))
        corrupt(path, "truncated header", static_cast<std::int64_t>(in.tellg()));
    SHVolume v;
    v.h = static_cast<int>(h);
    v.w = static_cast<int>(w);
    v.d = static_cast<int>(d);
    v.l_max = static_cast<int>(l_max);
    v.voxel_size = vs;
    if (v.h < 1 || v.w < 1 || v.d < 1) corrupt(path, "non-positive extents", 8);
    if (static_cast<int>(m) != v.m())
        corrupt(path, "coefficient count " + std::to_string(m) + " inconsistent with L_max " +
                          std::to_string(l_max), 8);
    for (double& a : v.affine)
        if (!read_pod(in, a)) corrupt(path, "truncated affine", static_cast<std::int64_t>(in.tellg()));
    const std::size_t count = static_cast<std::size_t>(v.voxel_count()) * m;
    v.data.resize(count);
    if (!in.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(count * sizeof(double))))
        corrupt(path, "truncated coefficient payload", static_cast<std::int64_t>(in.tellg()));
    return v;
}

SHVolume rician_corrupt(const SHVolume& v, double sigma, int n_dirs, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("rician_corrupt: sigma must be >= 0");
    if (n_dirs < 2 * v.m())
        throw std::invalid_argument("rician_corrupt: n_dirs must be at least twice the coefficient count");
    const std::vector<Direction> dirs = fibonacci_directions(n_dirs);
    const int mm = v.m();

    // Precompute the design matrix factorization once; every voxel reuses it.
    std::vector<std::vector<double>> rows;
    rows.reserve(dirs.size());
    for (const Direction& dir : dirs) rows.push_back(sh_basis_row(v.l_max, dir));

    SHVolume out = v;
    nd::parallel_for(v.voxel_count(), [&](std::int64_t lo, std::int64_t hi) {
        std::vector<SphereSample> samples;
        for (std::int64_t vi = lo; vi < hi; ++vi) {
            const double* c = v.data.data() + vi * mm;
            nd::Rng rng(seed, static_cast<std::uint64_t>(vi));
            samples.clear();
            samples.reserve(dirs.size());
            for (std::size_t s = 0; s < dirs.size(); ++s) {
                double a = 0.0;
                for (int q = 0; q < mm; ++q) a += rows[s][static_cast<std::size_t>(q)] * c[q];
                if (sigma > 0.0) {
                    a = std::max(a, 0.0);
                    const double n1 = sigma * rng.normal();
                    const double n2 = sigma * rng.normal();
                    a = std::sqrt((a + n1) * (a + n1) + n2 * n2);
                }
                samples.push_back({dirs[s], a});
            }
            const SHCoeffs fitted = fit_sh(samples, v.l_max);
            std::copy(fitted.values.begin(), fitted.values.end(), out.data.begin() + vi * mm);
        }
    });
    return out;
}

SHVolume downsample(const SHVolume& v, double target_voxel_size) {
    if (target_voxel_size < v.voxel_size)
        throw std::invalid_argument("downsample: target voxel size must be >= source voxel size");
    const auto new_extent = [&](int e) {
        return static_cast<int>(std::lround(e * v.voxel_size / target_voxel_size));
    };
    const int nh = new_extent(v.h), nw = new_extent(v.w), nd_ = new_extent(v.d);
    if (nh < 2 || nw < 2 || nd_ < 2)
        throw std::invalid_argument("downsample: target extents degenerate (< 2 per axis)");

    SHVolume out(nh, nw, nd_, v.l_max, target_voxel_size);
    // Center the coarse grid on the same world center as the source.
    const Vec3 c = v.world_center();
    const double ts = target_voxel_size;
    out.affine = {ts, 0, 0, c[0] - ts * (nh - 1) / 2.0,
                  0, ts, 0, c[1] - ts * (nw - 1) / 2.0,
                  0, 0, ts, c[2] - ts * (nd_ - 1) / 2.0,
                  0, 0, 0, 1};
    const Affine inv = affine_inverse(v.affine);
    const int mm = v.m();
    nd::parallel_for(out.voxel_count(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t vi = lo; vi < hi; ++vi) {
            const int i = static_cast<int>(vi / (static_cast<std::int64_t>(nw) * nd_));
            const int j = static_cast<int>((vi / nd_) % nw);
            const int k = static_cast<int>(vi % nd_);
            const Vec3 world = out.index_to_world({static_cast<double>(i), static_cast<double>(j),
                                                   static_cast<double>(k)});
            v.sample_index(affine_apply(inv, world), out.data.data() + vi * mm);
        }
    });
    return out;
}

}  // namespace gentract::sh
