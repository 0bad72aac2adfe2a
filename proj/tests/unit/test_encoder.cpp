#include <doctest.h>

#include <cmath>

#include "gentract/enc/refiner.hpp"
#include "gentract/enc/train_vae.hpp"
#include "gentract/gen/train.hpp"
#include "gentract/nd/adam.hpp"
#include "gentract/nd/ops.hpp"
#include "gentract/sh/phantom.hpp"
#include "gentract/tract/scaling.hpp"
#include "gradcheck.hpp"

using namespace gentract;

namespace {

sh::SHVolume tiny_volume(std::uint64_t seed, int extent = 16) {
    sh::PhantomSpec spec;
    spec.extents[0] = spec.extents[1] = spec.extents[2] = extent;
    spec.voxel_size_mm = 2.0;
    spec.l_max = 2;
    spec.seed = seed;
    sh::BundleSpec b;
    b.name = "b";
    const double mid = extent;  // world center along y/z (extent * 2 mm / 2)
    // Vary the geometry with the seed so multi-volume sets have spread.
    const double off = static_cast<double>(seed % 5) - 2.0;
    b.control_points_mm = {{6, mid + off, mid}, {2.0 * extent - 6, mid, mid + off}};
    b.radius_mm = 2.0;
    b.streamline_count = 30;
    b.points_per_streamline = 16;
    spec.bundles = {b};
    return sh::make_phantom(spec).volume;
}

std::vector<sh::SHVolume> normalized_set(int count) {
    std::vector<sh::SHVolume> raw;
    for (int i = 0; i < count; ++i) raw.push_back(tiny_volume(static_cast<std::uint64_t>(100 + i)));
    std::vector<const sh::SHVolume*> ptrs;
    for (const auto& v : raw) ptrs.push_back(&v);
    const tract::Streamline dummy = {{0, 0, 0}, {1, 1, 1}};
    const tract::ScalingStats stats = tract::ScalingStats::compute(ptrs, {&dummy});
    std::vector<sh::SHVolume> out;
    for (const auto& v : raw) out.push_back(tract::zscore_volume(v, stats));
    return out;
}

}  // namespace

TEST_CASE("vae shape pipeline and vanishing-noise sampling") {
    enc::EncoderConfig cfg;
    nd::Rng rng(1);
    enc::VaeParams vae = enc::VaeParams::init(cfg, rng);

    nd::Graph g;
    nd::Tensor x({1, 1, 16, 16, 16});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();
    const enc::VaeEncodeOut out = enc::vae_encode(g, vae, g.input(x), true);
    CHECK(out.mu.shape() == std::vector<int>{1, 4, 4, 4, 4});
    CHECK(out.logvar.shape() == std::vector<int>{1, 4, 4, 4, 4});

    // logvar = -40 emulates vanishing noise: sample == mu within 1e-8.
    nd::Var lv = g.input(nd::Tensor::full({1, 4, 4, 4, 4}, -40.0));
    nd::Tensor eta({1, 4, 4, 4, 4});
    for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = rng.normal();
    nd::Var z = enc::vae_sample(g, out.mu, lv, eta);
    for (std::int64_t i = 0; i < z.value().numel(); ++i)
        CHECK(std::abs(z.value()[i] - out.mu.value()[i]) < 1e-8);

    nd::Var recon = enc::vae_decode(g, vae, z, true);
    CHECK(recon.shape() == std::vector<int>{1, 1, 16, 16, 16});
}

TEST_CASE("vae_loss: zero at perfect reconstruction, closed-form KL values") {
    enc::EncoderConfig cfg;
    nd::Graph g;
    nd::Tensor x({1, 1, 2, 2, 2});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = 0.5 * i;
    nd::Var xv = g.input(x);
    nd::Var mu0 = g.input(nd::Tensor::zeros({1, 2, 1, 1, 1}));
    nd::Var lv0 = g.input(nd::Tensor::zeros({1, 2, 1, 1, 1}));
    nd::Var loss = enc::vae_loss(g, xv, xv, mu0, lv0, cfg.beta);
    CHECK(loss.value().item() == doctest::Approx(0.0).epsilon(1e-15));

    // KL with mu = 1, logvar = 0 on a single unit: 0.5.
    nd::Var mu1 = g.input(nd::Tensor::full({1, 1, 1, 1, 1}, 1.0));
    nd::Var lv1 = g.input(nd::Tensor::zeros({1, 1, 1, 1, 1}));
    nd::Var kl_only = enc::vae_loss(g, xv, xv, mu1, lv1, 1.0);
    CHECK(kl_only.value().item() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("KL term is nonnegative") {
    nd::Rng rng(9);
    nd::Graph g;
    nd::Tensor x({1, 1, 2, 2, 2});
    nd::Var xv = g.input(x);
    for (int trial = 0; trial < 30; ++trial) {
        nd::Tensor mu({1, 3, 1, 1, 1});
        nd::Tensor lv({1, 3, 1, 1, 1});
        for (std::int64_t i = 0; i < mu.numel(); ++i) {
            mu[i] = 2.0 * rng.normal();
            lv[i] = 2.0 * rng.normal();
        }
        nd::Var kl = enc::vae_loss(g, xv, xv, g.input(mu), g.input(lv), 1.0);
        CHECK(kl.value().item() >= -1e-15);
    }
}

TEST_CASE("refiner: shape contract and index sensitivity at random init") {
    enc::EncoderConfig cfg;
    nd::Rng rng(3);
    enc::RefinerParams ref = enc::RefinerParams::init(cfg, 6, rng);
    nd::Graph g;
    nd::Tensor z({1, 4, 8, 8, 8});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
    nd::Var zv = g.input(z);
    nd::Var a = enc::refine(g, ref, zv, 0, true);
    nd::Var b = enc::refine(g, ref, zv, 3, true);
    CHECK(a.shape() == std::vector<int>{1, 8, 4, 4, 4});
    double max_diff = 0.0;
    for (std::int64_t i = 0; i < a.value().numel(); ++i)
        max_diff = std::max(max_diff, std::abs(a.value()[i] - b.value()[i]));
    CHECK(max_diff > 0.0);
    CHECK_THROWS(enc::refine(g, ref, zv, 6, true));
}

TEST_CASE("refiner gradient against central differences") {
    enc::EncoderConfig cfg;
    cfg.c_c = 4;
    nd::Rng rng(4);
    enc::RefinerParams ref = enc::RefinerParams::init(cfg, 2, rng);
    nd::Tensor z({1, 4, 4, 4, 4});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();

    std::vector<nd::Tensor*> params;
    ref.visit([&](const std::string&, nd::Tensor& t) { params.push_back(&t); });
    const auto build = [&](nd::Graph& g) { return nd::mean_all(nd::gelu(enc::refine(g, ref, g.input(z), 1, false))); };
    const auto r = gradcheck::check(
        params,
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("fuse: reshape for m=1, block layout for m=2, order violations rejected") {
    nd::Graph g;
    SUBCASE("m=1 is a pure reshape") {
        nd::Tensor z({1, 2, 2, 2, 2});
        for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = static_cast<double>(i);
        nd::Var fused = enc::fuse(g, {{0, g.input(z)}});
        CHECK(fused.shape() == std::vector<int>{8, 2});
        // Token (h, w, d) with D fastest; channels c at (c, h, w, d).
        CHECK(fused.value().at({0, 0}) == z.at({0, 0, 0, 0, 0}));
        CHECK(fused.value().at({0, 1}) == z.at({0, 1, 0, 0, 0}));
        CHECK(fused.value().at({1, 0}) == z.at({0, 0, 0, 0, 1}));
        CHECK(fused.value().at({2, 0}) == z.at({0, 0, 0, 1, 0}));
        CHECK(fused.value().at({4, 0}) == z.at({0, 0, 1, 0, 0}));
    }
    SUBCASE("m=2 block layout: zeros then ones") {
        nd::Var z0 = g.input(nd::Tensor::zeros({1, 3, 2, 2, 2}));
        nd::Var z1 = g.input(nd::Tensor::full({1, 3, 2, 2, 2}, 1.0));
        nd::Var fused = enc::fuse(g, {{0, z0}, {1, z1}});
        CHECK(fused.shape() == std::vector<int>{8, 6});
        for (int tok = 0; tok < 8; ++tok) {
            for (int c = 0; c < 3; ++c) CHECK(fused.value().at({tok, c}) == 0.0);
            for (int c = 3; c < 6; ++c) CHECK(fused.value().at({tok, c}) == 1.0);
        }
    }
    SUBCASE("permuted input order is an error") {
        nd::Var z0 = g.input(nd::Tensor::zeros({1, 3, 2, 2, 2}));
        nd::Var z1 = g.input(nd::Tensor::full({1, 3, 2, 2, 2}, 1.0));
        CHECK_THROWS(enc::fuse(g, {{1, z1}, {0, z0}}));
    }
}

TEST_CASE("stage-1 overfit: one volume, 200 steps, reconstruction MSE < 1e-3") {
    enc::EncoderConfig cfg;
    cfg.vae_steps = 200;
    cfg.vae_batch = 1;
    cfg.vae_lr = 4e-3;
    cfg.beta = 1e-4;
    const auto vols = normalized_set(1);

    // Train only channel 0; the other channels behave identically.
    const nd::Tensor x = enc::volume_channel(vols[0], 0);
    nd::Rng rng(200);
    enc::VaeParams vae = enc::VaeParams::init(cfg, rng);
    std::vector<nd::Tensor*> params;
    vae.visit([&](const std::string&, nd::Tensor& t) { params.push_back(&t); });
    nd::Adam opt(params, nd::AdamConfig{cfg.vae_lr, 0.9, 0.999, 1e-8});
    double mse_val = 0.0;
    for (int step = 0; step < cfg.vae_steps; ++step) {
        nd::Graph g;
        nd::Var xv = g.input(x);
        const enc::VaeEncodeOut e = enc::vae_encode(g, vae, xv, false);
        nd::Tensor eta(e.mu.shape());
        for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = rng.normal();
        nd::Var z = enc::vae_sample(g, e.mu, e.logvar, eta);
        nd::Var recon = enc::vae_decode(g, vae, z, false);
        nd::Var diff = nd::sub(recon, xv);
        nd::Var mse = nd::mean_all(nd::mul(diff, diff));
        mse_val = mse.value().item();
        nd::Var loss = enc::vae_loss(g, xv, recon, e.mu, e.logvar, cfg.beta);
        opt.step(g.backward(loss));
    }
    CHECK(mse_val < 1e-3);
}

TEST_CASE("stage-1 on a 20-volume set: per-voxel MSE < 10% of channel variance") {
    enc::EncoderConfig cfg;
    cfg.vae_steps = 250;
    cfg.vae_batch = 2;
    cfg.vae_lr = 3e-3;
    cfg.beta = 1e-4;
    const auto vols = normalized_set(20);
    std::vector<const sh::SHVolume*> ptrs;
    for (const auto& v : vols) ptrs.push_back(&v);

    // Channel 0 only, for runtime; z-scored channels have variance 1.
    const sh::SHVolume l0 = [&] {
        sh::SHVolume copy = vols[0];
        return copy;
    }();
    (void)l0;
    nd::Rng rng(300);
    enc::VaeParams vae = enc::VaeParams::init(cfg, rng);
    std::vector<nd::Tensor*> params;
    vae.visit([&](const std::string&, nd::Tensor& t) { params.push_back(&t); });
    nd::Adam opt(params, nd::AdamConfig{cfg.vae_lr, 0.9, 0.999, 1e-8});
    for (int step = 0; step < cfg.vae_steps; ++step) {
        nd::Graph g;
        const int vi = step % static_cast<int>(vols.size());
        nd::Var xv = g.input(enc::volume_channel(vols[static_cast<std::size_t>(vi)], 0));
        const enc::VaeEncodeOut e = enc::vae_encode(g, vae, xv, false);
        nd::Tensor eta(e.mu.shape());
        for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = rng.normal();
        nd::Var recon = enc::vae_decode(g, vae, enc::vae_sample(g, e.mu, e.logvar, eta), false);
        opt.step(g.backward(enc::vae_loss(g, xv, recon, e.mu, e.logvar, cfg.beta)));
    }

    double mse_acc = 0.0, var_acc = 0.0;
    std::int64_t n = 0;
    for (const auto& v : vols) {
        nd::Graph g;
        const nd::Tensor x = enc::volume_channel(v, 0);
        nd::Var xv = g.input(x);
        const enc::VaeEncodeOut e = enc::vae_encode(g, vae, xv, true);
        nd::Var recon = enc::vae_decode(g, vae, e.mu, true);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const double d = recon.value()[i] - x[i];
            mse_acc += d * d;
            var_acc += x[i] * x[i];  // mean is ~0 after z-scoring
            ++n;
        }
    }
    const double mse = mse_acc / static_cast<double>(n);
    const double variance = var_acc / static_cast<double>(n);
    CHECK(mse < 0.1 * variance);
}

TEST_CASE("beta = 0 reaches strictly lower reconstruction MSE than beta = 1") {
    const auto vols = normalized_set(1);
    const nd::Tensor x = enc::volume_channel(vols[0], 0);

    const auto run = [&](double beta) {
        enc::EncoderConfig cfg;
        nd::Rng rng(400);
        enc::VaeParams vae = enc::VaeParams::init(cfg, rng);
        std::vector<nd::Tensor*> params;
        vae.visit([&](const std::string&, nd::Tensor& t) { params.push_back(&t); });
        nd::Adam opt(params, nd::AdamConfig{3e-3, 0.9, 0.999, 1e-8});
        double mse_val = 0.0;
        for (int step = 0; step < 120; ++step) {
            nd::Graph g;
            nd::Var xv = g.input(x);
            const enc::VaeEncodeOut e = enc::vae_encode(g, vae, xv, false);
            nd::Tensor eta(e.mu.shape());
            for (std::int64_t i = 0; i < eta.numel(); ++i) eta[i] = rng.normal();
            nd::Var recon = enc::vae_decode(g, vae, enc::vae_sample(g, e.mu, e.logvar, eta), false);
            nd::Var diff = nd::sub(recon, xv);
            mse_val = nd::mean_all(nd::mul(diff, diff)).value().item();
            opt.step(g.backward(enc::vae_loss(g, xv, recon, e.mu, e.logvar, beta)));
        }
        return mse_val;
    };
    CHECK(run(0.0) < run(1.0));
}

TEST_CASE("train_vaes is deterministic and decreases the loss") {
    enc::EncoderConfig cfg;
    cfg.vae_steps = 40;
    cfg.vae_batch = 1;
    const auto vols = normalized_set(1);
    std::vector<const sh::SHVolume*> ptrs{&vols[0]};
    const enc::VaeTrainResult a = enc::train_vaes(ptrs, cfg, 777);
    const enc::VaeTrainResult b = enc::train_vaes(ptrs, cfg, 777);
    REQUIRE(a.loss_curves.size() == b.loss_curves.size());
    for (std::size_t ch = 0; ch < a.loss_curves.size(); ++ch)
        for (std::size_t s = 0; s < a.loss_curves[ch].size(); ++s)
            CHECK(a.loss_curves[ch][s].second == b.loss_curves[ch][s].second);
    for (std::size_t ch = 0; ch < a.loss_curves.size(); ++ch)
        CHECK(a.loss_curves[ch].back().second < a.loss_curves[ch].front().second);

    // Bit-identical parameters across both runs.
    for (std::size_t ch = 0; ch < a.vaes.size(); ++ch) {
        std::vector<const nd::Tensor*> ta, tb;
        const_cast<enc::VaeParams&>(a.vaes[ch]).visit([&](const std::string&, nd::Tensor& t) { ta.push_back(&t); });
        const_cast<enc::VaeParams&>(b.vaes[ch]).visit([&](const std::string&, nd::Tensor& t) { tb.push_back(&t); });
        for (std::size_t i = 0; i < ta.size(); ++i)
            for (std::int64_t j = 0; j < ta[i]->numel(); ++j) CHECK((*ta[i])[j] == (*tb[i])[j]);
    }
}
