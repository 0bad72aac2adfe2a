#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gentract/nd/rng.hpp"
#include "gentract/sh/phantom.hpp"

using namespace gentract;

namespace {

constexpr double kPi = 3.14159265358979323846;

sh::PhantomSpec straight_spec() {
    sh::PhantomSpec spec;
    spec.extents[0] = spec.extents[1] = spec.extents[2] = 16;
    spec.voxel_size_mm = 2.0;
    spec.l_max = 2;
    spec.seed = 11;
    sh::BundleSpec b;
    b.name = "straight_x";
    b.control_points_mm = {{6, 16, 16}, {26, 16, 16}};
    b.radius_mm = 2.0;
    b.streamline_count = 40;
    b.points_per_streamline = 16;
    spec.bundles = {b};
    return spec;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("straight bundle: every intersected voxel peaks along +x") {
    const sh::PhantomResult result = sh::make_phantom(straight_spec());
    const sh::SHVolume& v = result.volume;
    const auto dirs = sh::fibonacci_directions(1000);
    int tissue = 0;
    for (std::int64_t vox = 0; vox < v.voxel_count(); ++vox) {
        const double* c = v.data.data() + vox * v.m();
        // Background voxels carry only the scaled isotropic coefficient.
        bool tissue_voxel = false;
        for (int q = 1; q < v.m(); ++q) tissue_voxel = tissue_voxel || c[q] != 0.0;
        if (!tissue_voxel) continue;
        ++tissue;
        sh::SHCoeffs sc(v.l_max);
        for (int q = 0; q < v.m(); ++q) sc.values[static_cast<std::size_t>(q)] = c[q];
        double best = -1e300;
        sh::Direction best_dir{{1, 0, 0}};
        for (const sh::Direction& d : dirs) {
            const double val = sh::eval_fodf(sc, d);
            if (val > best) {
                best = val;
                best_dir = d;
            }
        }
        CHECK(std::abs(best_dir.v[0]) > std::cos(5.0 * kPi / 180.0));
    }
    CHECK(tissue > 20);
}

TEST_CASE("crossing bundles: crossing voxels show two local maxima near each axis") {
    sh::PhantomSpec spec = straight_spec();
    spec.l_max = 6;  // enough angular resolution to separate the peaks
    sh::BundleSpec b2 = spec.bundles[0];
    b2.name = "straight_y";
    b2.control_points_mm = {{16, 6, 16}, {16, 26, 16}};
    spec.bundles.push_back(b2);
    const sh::PhantomResult result = sh::make_phantom(spec);
    const sh::SHVolume& v = result.volume;

    // The central voxel is crossed by both bundles.
    const int ci = 8, cj = 8, ck = 8;
    sh::SHCoeffs sc(v.l_max);
    const double* c = v.voxel(ci, cj, ck);
    for (int q = 0; q < v.m(); ++q) sc.values[static_cast<std::size_t>(q)] = c[q];

    const auto amp_at = [&](const Vec3& d) { return sh::eval_fodf(sc, sh::Direction{d}); };
    const double ax = amp_at({1, 0, 0});
    const double ay = amp_at({0, 1, 0});
    const double az = amp_at({0, 0, 1});
    // Local maxima near +-x and +-y (within 10 degrees by construction);
    // the z amplitude stays clearly below both.
    CHECK(ax > 0.2);
    CHECK(ay > 0.2);
    CHECK(az < 0.5 * std::min(ax, ay));
}

TEST_CASE("same spec and seed give bit-identical phantom files") {
    const sh::PhantomSpec spec = straight_spec();
    const sh::PhantomResult a = sh::make_phantom(spec);
    const sh::PhantomResult b = sh::make_phantom(spec);
    REQUIRE(a.volume.data.size() == b.volume.data.size());
    for (std::size_t i = 0; i < a.volume.data.size(); ++i) CHECK(a.volume.data[i] == b.volume.data[i]);
    sh::write_shv(a.volume, "phantom_a.shv");
    sh::write_shv(b.volume, "phantom_b.shv");
    CHECK(slurp("phantom_a.shv") == slurp("phantom_b.shv"));
    std::remove("phantom_a.shv");
    std::remove("phantom_b.shv");
}

TEST_CASE("bundle leaving the volume bounds is an error naming the bundle") {
    sh::PhantomSpec spec = straight_spec();
    spec.bundles[0].control_points_mm = {{6, 16, 16}, {60, 16, 16}};  // beyond 32 mm
    CHECK_THROWS_WITH_AS(sh::make_phantom(spec), doctest::Contains("straight_x"), std::runtime_error);
}

TEST_CASE("ground truth streamlines start and end inside the endpoint regions") {
    const sh::PhantomResult result = sh::make_phantom(straight_spec());
    for (const sh::GroundTruthBundle& b : result.ground_truth.bundles)
        for (const tract::Streamline& s : b.streamlines) {
            const bool fwd = b.endpoints[0].contains(s.front()) && b.endpoints[1].contains(s.back());
            const bool rev = b.endpoints[1].contains(s.front()) && b.endpoints[0].contains(s.back());
            CHECK((fwd || rev));
        }
}

TEST_CASE("ground truth JSON round-trip") {
    const sh::PhantomResult result = sh::make_phantom(straight_spec());
    result.ground_truth.save("gt_test.json");
    const sh::GroundTruth back = sh::GroundTruth::load("gt_test.json");
    REQUIRE(back.bundles.size() == result.ground_truth.bundles.size());
    CHECK(back.voxel_size_mm == result.ground_truth.voxel_size_mm);
    const auto& b0 = back.bundles[0];
    const auto& a0 = result.ground_truth.bundles[0];
    CHECK(b0.name == a0.name);
    REQUIRE(b0.streamlines.size() == a0.streamlines.size());
    for (std::size_t i = 0; i < b0.centroid.size(); ++i)
        for (int ax = 0; ax < 3; ++ax) CHECK(b0.centroid[i][ax] == a0.centroid[i][ax]);
    std::remove("gt_test.json");
}

TEST_CASE("shv round-trip is bit-exact and corrupted files fail loudly") {
    const sh::PhantomResult result = sh::make_phantom(straight_spec());
    sh::write_shv(result.volume, "vol_test.shv");
    const sh::SHVolume back = sh::read_shv("vol_test.shv");
    CHECK(back.h == result.volume.h);
    CHECK(back.l_max == result.volume.l_max);
    for (std::size_t i = 0; i < back.data.size(); ++i) CHECK(back.data[i] == result.volume.data[i]);
    sh::write_shv(back, "vol_test2.shv");
    CHECK(slurp("vol_test.shv") == slurp("vol_test2.shv"));

    std::fstream f("vol_test.shv", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("BROKEN", 6);
    f.close();
    CHECK_THROWS_WITH_AS(sh::read_shv("vol_test.shv"), doctest::Contains("bad magic"), std::runtime_error);

    const std::string all = slurp("vol_test2.shv");
    std::ofstream out("vol_test3.shv", std::ios::binary | std::ios::trunc);
    out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(sh::read_shv("vol_test3.shv"), doctest::Contains("truncated"), std::runtime_error);
    std::remove("vol_test.shv");
    std::remove("vol_test2.shv");
    std::remove("vol_test3.shv");
}

TEST_CASE("rician corruption: sigma 0 is the identity, sigma > 0 perturbs") {
    const sh::PhantomResult result = sh::make_phantom(straight_spec());
    const sh::SHVolume& v = result.volume;
    const sh::SHVolume same = sh::rician_corrupt(v, 0.0, 2 * v.m() + 16, 99);
    for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(std::abs(same.data[i] - v.data[i]) < 1e-9);

    const sh::SHVolume noisy = sh::rician_corrupt(v, 0.005, 2 * v.m() + 16, 99);
    double rms = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const double d = noisy.data[i] - v.data[i];
        rms += d * d;
    }
    CHECK(std::sqrt(rms / static_cast<double>(v.data.size())) > 0.0);

    const sh::SHVolume noisy2 = sh::rician_corrupt(v, 0.005, 2 * v.m() + 16, 99);
    for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(noisy.data[i] == noisy2.data[i]);
}

TEST_CASE("rician mean of a constant signal matches the moment formula") {
    // Monte-Carlo oracle: for a = 1, sigma = 0.1, the Rician mean is
    // sigma sqrt(pi/2) L_{1/2}(-a^2 / (2 sigma^2)) with
    // L_{1/2}(x) = e^{x/2} ((1 - x) I_0(-x/2) - x I_1(-x/2)).
    const double a = 1.0, sigma = 0.1;
    const double x = -a * a / (2.0 * sigma * sigma);
    const double half = -x / 2.0;
    const double laguerre = std::exp(x / 2.0) * ((1.0 - x) * std::cyl_bessel_i(0.0, half) - x * std::cyl_bessel_i(1.0, half));
    const double expected = sigma * std::sqrt(kPi / 2.0) * laguerre;

    nd::Rng rng(123);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double n1 = sigma * rng.normal();
        const double n2 = sigma * rng.normal();
        acc += std::sqrt((a + n1) * (a + n1) + n2 * n2);
    }
    const double mc = acc / n;
    CHECK(std::abs(mc - expected) / expected < 0.01);
}

TEST_CASE("downsample: identity at source size, constants, and exact linear ramps") {
    sh::SHVolume v(8, 8, 8, 0, 2.0);
    SUBCASE("identity") {
        for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(i) * 0.25;
        const sh::SHVolume same = sh::downsample(v, 2.0);
        CHECK(same.h == 8);
        for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(std::abs(same.data[i] - v.data[i]) < 1e-12);
    }
    SUBCASE("constant volume shrinks to a constant volume") {
        for (double& d : v.data) d = 3.25;
        const sh::SHVolume small = sh::downsample(v, 4.0);
        CHECK(small.h == 4);
        for (double d : small.data) CHECK(d == doctest::Approx(3.25).epsilon(1e-12));
    }
    SUBCASE("linear ramp is reproduced exactly at new voxel centers") {
        // Trilinear interpolation is exact on affine fields.
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                for (int k = 0; k < 8; ++k) {
                    const Vec3 w = v.index_to_world({double(i), double(j), double(k)});
                    v.data[static_cast<std::size_t>(v.offset(i, j, k))] = 2.0 * w[0] - 0.5 * w[1] + 0.25 * w[2] + 1.0;
                }
        const sh::SHVolume small = sh::downsample(v, 4.0);
        for (int i = 0; i < small.h; ++i)
            for (int j = 0; j < small.w; ++j)
                for (int k = 0; k < small.d; ++k) {
                    const Vec3 w = small.index_to_world({double(i), double(j), double(k)});
                    const double expected = 2.0 * w[0] - 0.5 * w[1] + 0.25 * w[2] + 1.0;
                    CHECK(small.data[static_cast<std::size_t>(small.offset(i, j, k))] ==
                          doctest::Approx(expected).epsilon(1e-9));
                }
    }
    SUBCASE("degenerate target extents rejected") { CHECK_THROWS(sh::downsample(v, 10.0)); }
    SUBCASE("upsampling rejected") { CHECK_THROWS(sh::downsample(v, 1.0)); }
}
