#include <doctest.h>

#include <cmath>

#include "gentract/eval/metrics.hpp"
#include "gentract/eval/report.hpp"
#include "gentract/nd/rng.hpp"

using namespace gentract;

namespace {

sh::GroundTruth two_bundle_gt() {
    sh::GroundTruth gt;
    gt.voxel_size_mm = 2.0;
    for (int b = 0; b < 2; ++b) {
        sh::GroundTruthBundle gb;
        gb.name = b == 0 ? "left" : "right";
        const double y = b == 0 ? 10.0 : 40.0;
        for (int s = 0; s < 25; ++s) {
            tract::Streamline line;
            const double off = 0.05 * s;
            for (int i = 0; i < 16; ++i) line.push_back({2.0 * i, y + off, 5.0});
            gb.streamlines.push_back(line);
        }
        tract::Streamline centroid;
        for (int i = 0; i < 16; ++i) centroid.push_back({2.0 * i, y, 5.0});
        gb.centroid = centroid;
        gb.endpoints[0] = {centroid.front(), 3.0};
        gb.endpoints[1] = {centroid.back(), 3.0};
        gt.bundles.push_back(std::move(gb));
    }
    return gt;
}

tract::Tractogram from_streamlines(std::vector<tract::Streamline> lines) {
    tract::Tractogram t;
    t.extents[0] = t.extents[1] = t.extents[2] = 32;
    t.voxel_size = 2.0;
    t.affine = {2, 0, 0, 1, 0, 2, 0, 1, 0, 0, 2, 1, 0, 0, 0, 1};
    t.streamlines = std::move(lines);
    return t;
}

}  // namespace

TEST_CASE("mdf: zero on self and reversal, exact offset for parallel lines") {
    tract::Streamline s;
    for (int i = 0; i < 12; ++i) s.push_back({1.0 * i, 0.5 * i, 0.0});
    CHECK(eval::mdf(s, s) == 0.0);
    tract::Streamline rev(s.rbegin(), s.rend());
    CHECK(eval::mdf(s, rev) == 0.0);

    tract::Streamline shifted = s;
    for (Vec3& p : shifted) p[2] += 3.5;
    CHECK(eval::mdf(s, shifted) == doctest::Approx(3.5).epsilon(1e-12));

    tract::Streamline wrong(s.begin(), s.begin() + 6);
    CHECK_THROWS(eval::mdf(s, wrong));
}

TEST_CASE("mdf symmetry and nonnegativity") {
    nd::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        tract::Streamline a, b;
        for (int i = 0; i < 8; ++i) {
            a.push_back({rng.normal(), rng.normal(), rng.normal()});
            b.push_back({rng.normal(), rng.normal(), rng.normal()});
        }
        const double ab = eval::mdf(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab == eval::mdf(b, a));
        tract::Streamline bf(b.rbegin(), b.rend());
        CHECK(ab == doctest::Approx(eval::mdf(a, bf)).epsilon(1e-12));
    }
}

TEST_CASE("filtering ground truth against itself: all TP, full discovery at any tau") {
    const sh::GroundTruth gt = two_bundle_gt();
    std::vector<tract::Streamline> lines;
    for (const auto& b : gt.bundles)
        for (const auto& s : b.streamlines) lines.push_back(s);
    const tract::Tractogram t = from_streamlines(lines);
    const eval::FilterResult r = eval::filter_streamlines(t, gt, 2.0 * gt.voxel_size_mm);
    CHECK(eval::precision(r) == 1.0);
    CHECK(eval::bundles_discovered(r, gt, 1) == 2);
    CHECK(eval::bundles_discovered(r, gt, 25) == 2);
    CHECK(eval::bundles_discovered(r, gt, 26) == 0);
}

TEST_CASE("streamlines translated far away are all FP") {
    const sh::GroundTruth gt = two_bundle_gt();
    std::vector<tract::Streamline> lines;
    for (const auto& b : gt.bundles)
        for (const auto& s : b.streamlines) {
            tract::Streamline moved = s;
            for (Vec3& p : moved) p[2] += 10.0 * 2.0 * gt.voxel_size_mm;
            lines.push_back(moved);
        }
    const eval::FilterResult r = eval::filter_streamlines(from_streamlines(lines), gt, 2.0 * gt.voxel_size_mm);
    CHECK(eval::precision(r) == 0.0);
}

TEST_CASE("a truncated streamline matching the centroid is FP via the endpoint test") {
    const sh::GroundTruth gt = two_bundle_gt();
    const tract::Streamline& ref = gt.bundles[0].streamlines[0];
    // Keep 60% of the curve: close in MDF but ends mid-bundle.
    tract::Streamline trunc(ref.begin(), ref.begin() + (ref.size() * 3) / 5);
    const eval::FilterResult r =
        eval::filter_streamlines(from_streamlines({trunc}), gt, 2.0 * gt.voxel_size_mm);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].distance_mm <= 2.0 * gt.voxel_size_mm);  // assignment would pass on distance
    CHECK_FALSE(r.rows[0].tp);
}

TEST_CASE("out-of-bounds flags force FP") {
    const sh::GroundTruth gt = two_bundle_gt();
    tract::Tractogram t = from_streamlines({gt.bundles[0].streamlines[0], gt.bundles[1].streamlines[0]});
    t.out_of_bounds = {1, 0};
    const eval::FilterResult r = eval::filter_streamlines(t, gt, 2.0 * gt.voxel_size_mm);
    CHECK_FALSE(r.rows[0].tp);
    CHECK(r.rows[1].tp);
    CHECK(eval::precision(r) == 0.5);
}

TEST_CASE("precision arithmetic and monotonicity") {
    eval::FilterResult r;
    for (int i = 0; i < 850; ++i) r.rows.push_back({true, "b", 0.1});
    for (int i = 0; i < 150; ++i) r.rows.push_back({false, "", 99.0});
    CHECK(eval::precision(r) == doctest::Approx(0.85).epsilon(1e-15));

    eval::FilterResult all_tp;
    all_tp.rows.assign(10, {true, "b", 0.0});
    CHECK(eval::precision(all_tp) == 1.0);
    eval::FilterResult all_fp;
    all_fp.rows.assign(10, {false, "", 1.0});
    CHECK(eval::precision(all_fp) == 0.0);

    // Monotone: adding a TP never decreases, adding an FP never increases.
    nd::Rng rng(6);
    eval::FilterResult acc;
    acc.rows.push_back({true, "b", 0.0});
    double prev = eval::precision(acc);
    for (int i = 0; i < 200; ++i) {
        const bool tp = rng.uniform() < 0.5;
        acc.rows.push_back({tp, tp ? "b" : "", 0.0});
        const double now = eval::precision(acc);
        if (tp)
            CHECK(now >= prev - 1e-15);
        else
            CHECK(now <= prev + 1e-15);
        prev = now;
    }
    CHECK_THROWS(eval::precision(eval::FilterResult{}));
}

TEST_CASE("bundle discovery thresholds") {
    const sh::GroundTruth gt = two_bundle_gt();
    eval::FilterResult r;
    for (int i = 0; i < 19; ++i) r.rows.push_back({true, "left", 0.1});
    CHECK(eval::bundles_discovered(r, gt, 20) == 0);  // exactly K-1 is not discovered
    r.rows.push_back({true, "left", 0.1});
    CHECK(eval::bundles_discovered(r, gt, 20) == 1);
    eval::FilterResult empty;
    empty.rows.push_back({false, "", 1.0});
    CHECK(eval::bundles_discovered(empty, gt, 1) == 0);
}

TEST_CASE("metrics CSV: layout, numeric round-trip, determinism") {
    eval::MetricsReport r;
    r.run_id = "steps10_clean";
    r.objective = "diffusion";
    r.layers = 4;
    r.width = 64;
    r.steps = 10;
    r.count = 500;
    r.precision = 0.8537219384719234;
    r.bundles_discovered = 3;
    r.bundle_total = 3;
    r.wall_clock_s = 12.34567890123456789;
    r.seed = 12345;
    r.config_hash = "deadbeef";

    const std::string csv = eval::metrics_csv({r});
    CHECK(csv.find("run_id,objective,M,n,steps,count,precision,bundles_discovered,bundle_total,"
                   "wall_clock_s,seed,config_hash") == 0);
    CHECK(csv == eval::metrics_csv({r}));

    const auto back = eval::parse_metrics_csv(csv);
    REQUIRE(back.size() == 1);
    CHECK(back[0].precision == r.precision);
    CHECK(back[0].wall_clock_s == r.wall_clock_s);
    CHECK(back[0].seed == r.seed);
    CHECK(back[0].run_id == r.run_id);

    // One report -> exactly one data row.
    int rows = 0;
    for (char c : csv) rows += c == '\n' ? 1 : 0;
    CHECK(rows == 2);
}

TEST_CASE("sweep SVG: deterministic bytes, equal precision means equal y") {
    eval::MetricsReport a;
    a.run_id = "a";
    a.steps = 5;
    a.precision = 0.7;
    a.wall_clock_s = 1.0;
    eval::MetricsReport b = a;
    b.run_id = "b";
    b.steps = 50;
    b.wall_clock_s = 9.0;

    const std::string svg1 = eval::sweep_svg({a, b});
    const std::string svg2 = eval::sweep_svg({a, b});
    CHECK(svg1 == svg2);
    CHECK(svg1.find("<svg") != std::string::npos);

    // Equal precision -> identical cy attribute values.
    const auto cy_of = [&](const std::string& svg, std::size_t from) {
        const std::size_t p = svg.find("cy=\"", from);
        const std::size_t e = svg.find('"', p + 4);
        return svg.substr(p + 4, e - p - 4);
    };
    const std::size_t first = svg1.find("<circle");
    const std::size_t second = svg1.find("<circle", first + 1);
    CHECK(cy_of(svg1, first) == cy_of(svg1, second));
}
