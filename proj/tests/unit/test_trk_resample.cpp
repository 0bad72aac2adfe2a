#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gentract/nd/rng.hpp"
#include "gentract/tract/scaling.hpp"
#include "gentract/tract/trk.hpp"

using namespace gentract;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

tract::Tractogram demo_tractogram() {
    tract::Tractogram t;
    t.extents[0] = t.extents[1] = t.extents[2] = 16;
    t.voxel_size = 2.0;
    t.affine = {2, 0, 0, 1, 0, 2, 0, 1, 0, 0, 2, 1, 0, 0, 0, 1};
    t.streamlines.push_back({{1.5, 2.25, 3.0}, {4.0, 5.5, 6.75}, {7.0, 8.0, 9.0}});
    t.streamlines.push_back({{10.0, 11.0, 12.0}, {13.5, 14.25, 15.125}});
    return t;
}

}  // namespace

TEST_CASE("trk round-trip: values within f32 rounding, bytes stable") {
    const tract::Tractogram t = demo_tractogram();
    tract::write_trk(t, "trk_test.trk");

    const std::string bytes = slurp("trk_test.trk");
    CHECK(bytes.size() >= 1000);
    CHECK(bytes.compare(0, 6, std::string("TRACK\0", 6)) == 0);

    const tract::Tractogram back = tract::read_trk("trk_test.trk");
    REQUIRE(back.streamlines.size() == t.streamlines.size());
    for (std::size_t s = 0; s < t.streamlines.size(); ++s) {
        REQUIRE(back.streamlines[s].size() == t.streamlines[s].size());
        for (std::size_t i = 0; i < t.streamlines[s].size(); ++i)
            for (int a = 0; a < 3; ++a)
                CHECK(std::abs(back.streamlines[s][i][a] - t.streamlines[s][i][a]) < 1e-5);
    }

    tract::write_trk(back, "trk_test2.trk");
    CHECK(slurp("trk_test.trk") == slurp("trk_test2.trk"));
    std::remove("trk_test.trk");
    std::remove("trk_test2.trk");
}

TEST_CASE("trk structured errors: bad magic, truncation, n_count mismatch") {
    const tract::Tractogram t = demo_tractogram();
    tract::write_trk(t, "trk_bad.trk");
    const std::string all = slurp("trk_bad.trk");

    SUBCASE("bad magic") {
        std::string broken = all;
        broken[0] = 'X';
        std::ofstream out("trk_bad.trk", std::ios::binary | std::ios::trunc);
        out.write(broken.data(), static_cast<std::streamsize>(broken.size()));
        out.close();
        CHECK_THROWS_WITH_AS(tract::read_trk("trk_bad.trk"), doctest::Contains("bad magic"), std::runtime_error);
    }
    SUBCASE("truncated mid-streamline names the offset") {
        std::ofstream out("trk_bad.trk", std::ios::binary | std::ios::trunc);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 5));
        out.close();
        CHECK_THROWS_WITH_AS(tract::read_trk("trk_bad.trk"), doctest::Contains("byte offset"),
                             std::runtime_error);
    }
    SUBCASE("n_count larger than the stream") {
        std::string broken = all;
        const std::int32_t wrong = 5;
        std::memcpy(broken.data() + 988, &wrong, 4);
        std::ofstream out("trk_bad.trk", std::ios::binary | std::ios::trunc);
        out.write(broken.data(), static_cast<std::streamsize>(broken.size()));
        out.close();
        CHECK_THROWS_WITH_AS(tract::read_trk("trk_bad.trk"), doctest::Contains("expected 5 streamlines"),
                             std::runtime_error);
    }
    std::remove("trk_bad.trk");
}

TEST_CASE("resample: uniform spacing on a straight segment") {
    const tract::Streamline s = {{0, 0, 0}, {3, 0, 0}};
    const tract::Streamline r = tract::resample_streamline(s, 4);
    REQUIRE(r.size() == 4);
    for (int j = 0; j < 4; ++j) {
        CHECK(r[static_cast<std::size_t>(j)][0] == doctest::Approx(j).epsilon(1e-12));
        CHECK(r[static_cast<std::size_t>(j)][1] == 0.0);
    }
}

TEST_CASE("resample preserves endpoints exactly and is idempotent on uniform input") {
    const tract::Streamline s = {{0.1, 0.2, 0.3}, {1.4, -0.5, 2.0}, {2.2, 0.9, 3.7}};
    const tract::Streamline r = tract::resample_streamline(s, 9);
    CHECK(r.front() == s.front());
    CHECK(r.back() == s.back());

    const tract::Streamline again = tract::resample_streamline(r, 9);
    for (std::size_t i = 0; i < r.size(); ++i)
        for (int a = 0; a < 3; ++a) CHECK(std::abs(again[i][a] - r[i][a]) < 1e-12);
}

TEST_CASE("resampled circle arc has equal chords; straight-line length is preserved") {
    // Arc-length oracle: a half circle of radius 10 has length 10 pi.
    tract::Streamline arc;
    const int n_in = 2000;
    for (int i = 0; i < n_in; ++i) {
        const double a = 3.14159265358979323846 * i / (n_in - 1);
        arc.push_back({10.0 * std::cos(a), 10.0 * std::sin(a), 0.0});
    }
    const tract::Streamline r = tract::resample_streamline(arc, 64);
    std::vector<double> chords;
    for (std::size_t i = 1; i < r.size(); ++i) chords.push_back(norm(r[i] - r[i - 1]));
    for (double c : chords) CHECK(std::abs(c - chords[0]) / chords[0] < 1e-6);

    const tract::Streamline line = {{0, 0, 0}, {0.5, 0, 0}, {2.7, 0, 0}, {5, 0, 0}};
    const tract::Streamline lr = tract::resample_streamline(line, 17);
    CHECK(std::abs(tract::polyline_length(lr) - tract::polyline_length(line)) < 1e-9 * 5.0);
}

TEST_CASE("resample error paths") {
    CHECK_THROWS(tract::resample_streamline({{0, 0, 0}, {1, 0, 0}}, 1));
    CHECK_THROWS(tract::resample_streamline({{1, 1, 1}, {1, 1, 1}}, 4));  // zero length
    CHECK_THROWS(tract::resample_streamline({{1, 1, 1}}, 4));
}

TEST_CASE("canonicalize maps a streamline and its reverse to the same sequence") {
    nd::Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        tract::Streamline s;
        for (int i = 0; i < 8; ++i) s.push_back({rng.normal(), rng.normal(), rng.normal()});
        tract::Streamline rev(s.rbegin(), s.rend());
        const tract::Streamline a = tract::canonicalize(s);
        const tract::Streamline b = tract::canonicalize(rev);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (int ax = 0; ax < 3; ++ax) CHECK(a[i][ax] == b[i][ax]);
    }
}

TEST_CASE("minmax scaling maps bounds to +-1 and inverts exactly") {
    tract::ScalingStats st;
    st.coord_min = {0, 10, -5};
    st.coord_max = {4, 30, 5};
    st.coeff_mean = {0.0};
    st.coeff_std = {1.0};

    const tract::Streamline s = {{0, 10, -5}, {4, 30, 5}, {2, 20, 0}};
    const tract::Streamline scaled = tract::minmax_scale(s, st);
    CHECK(scaled[0][0] == -1.0);
    CHECK(scaled[0][1] == -1.0);
    CHECK(scaled[1][0] == 1.0);
    CHECK(scaled[1][2] == 1.0);
    CHECK(scaled[2][0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(scaled[2][1] == doctest::Approx(0.0).epsilon(1e-15));

    nd::Rng rng(77);
    tract::Streamline rand_line;
    for (int i = 0; i < 16; ++i)
        rand_line.push_back({4 * rng.uniform(), 10 + 20 * rng.uniform(), -5 + 10 * rng.uniform()});
    const tract::Streamline back = tract::minmax_unscale(tract::minmax_scale(rand_line, st), st);
    for (std::size_t i = 0; i < rand_line.size(); ++i)
        for (int a = 0; a < 3; ++a) CHECK(std::abs(back[i][a] - rand_line[i][a]) < 1e-12);

    // Coordinates outside the training range are flagged, not clamped.
    const tract::Streamline outside = {{-10, 10, -5}, {4, 30, 5}};
    const tract::Streamline oscaled = tract::minmax_scale(outside, st);
    CHECK(oscaled[0][0] < -1.0);
    CHECK(tract::out_of_bounds_scaled(oscaled));
    CHECK_FALSE(tract::out_of_bounds_scaled(scaled));
}

TEST_CASE("zscore volume: stats-defining set normalizes to mean 0 std 1") {
    nd::Rng rng(88);
    sh::SHVolume v(6, 6, 6, 2, 1.0);
    for (double& d : v.data) d = 2.0 + 3.0 * rng.normal();
    const tract::Streamline dummy = {{0, 0, 0}, {1, 1, 1}};
    const tract::ScalingStats st = tract::ScalingStats::compute({&v}, {&dummy});
    const sh::SHVolume z = tract::zscore_volume(v, st);
    const int m = v.m();
    for (int q = 0; q < m; ++q) {
        double mean = 0, var = 0;
        for (std::int64_t i = 0; i < v.voxel_count(); ++i) mean += z.data[static_cast<std::size_t>(i * m + q)];
        mean /= static_cast<double>(v.voxel_count());
        for (std::int64_t i = 0; i < v.voxel_count(); ++i) {
            const double d = z.data[static_cast<std::size_t>(i * m + q)] - mean;
            var += d * d;
        }
        var /= static_cast<double>(v.voxel_count());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }

    // Applying stats (mean 2, std 2) to the value 4 gives 1.
    tract::ScalingStats manual;
    manual.coord_min = {0, 0, 0};
    manual.coord_max = {1, 1, 1};
    manual.coeff_mean = std::vector<double>(static_cast<std::size_t>(m), 2.0);
    manual.coeff_std = std::vector<double>(static_cast<std::size_t>(m), 2.0);
    sh::SHVolume four(2, 2, 2, 2, 1.0);
    for (double& d : four.data) d = 4.0;
    const sh::SHVolume one = tract::zscore_volume(four, manual);
    for (double d : one.data) CHECK(d == 1.0);
}

TEST_CASE("scaling stats reject degenerate inputs") {
    tract::ScalingStats st;
    st.coord_min = {0, 0, 0};
    st.coord_max = {0, 1, 1};  // max == min on x
    st.coeff_mean = {0.0};
    st.coeff_std = {1.0};
    CHECK_THROWS(st.validate());

    st.coord_max = {1, 1, 1};
    st.coeff_std = {0.0};
    CHECK_THROWS(st.validate());
}

TEST_CASE("scaling stats JSON round-trip") {
    tract::ScalingStats st;
    st.coord_min = {0.125, -3.5, 2.0};
    st.coord_max = {10.0, 4.5, 30.0};
    st.coeff_mean = {0.5, -0.25};
    st.coeff_std = {1.5, 2.25};
    st.config_hash = "abc123";
    st.save("stats_test.json");
    const tract::ScalingStats back = tract::ScalingStats::load("stats_test.json");
    CHECK(back.coord_min == st.coord_min);
    CHECK(back.coord_max == st.coord_max);
    CHECK(back.coeff_mean == st.coeff_mean);
    CHECK(back.coeff_std == st.coeff_std);
    CHECK(back.config_hash == st.config_hash);
    std::remove("stats_test.json");
}
