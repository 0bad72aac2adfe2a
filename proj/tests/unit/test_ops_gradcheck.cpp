#include <doctest.h>

#include <cmath>

#include "gentract/nd/ops.hpp"
#include "gentract/nd/rng.hpp"
#include "gradcheck.hpp"

using namespace gentract;

namespace {

nd::Tensor randn(std::vector<int> shape, nd::Rng& rng, double scale = 1.0) {
    nd::Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand-computed product") {
    nd::Rng rng(1);
    nd::Graph g;
    nd::Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    nd::Tensor a = randn({3, 3}, rng);
    nd::Var out = nd::matmul(g.input(eye), g.input(a));
    for (std::int64_t i = 0; i < 9; ++i) CHECK(out.value()[i] == doctest::Approx(a[i]).epsilon(1e-15));

    nd::Tensor l({2, 2}, {1, 2, 3, 4});
    nd::Tensor r({2, 1}, {0, 1});
    nd::Var prod = nd::matmul(g.input(l), g.input(r));
    CHECK(prod.value()[0] == 2.0);
    CHECK(prod.value()[1] == 4.0);

    CHECK_THROWS(nd::matmul(g.input(l), g.input(nd::Tensor({3, 1}))));
}

TEST_CASE("matmul gradient matches central differences") {
    nd::Rng rng(2);
    nd::Tensor a = randn({3, 4}, rng);
    nd::Tensor b = randn({4, 2}, rng);
    const auto loss_of = [&] {
        nd::Graph g;
        return nd::sum_all(nd::matmul(g.param(a), g.param(b))).value().item();
    };
    const auto grads_of = [&] {
        nd::Graph g;
        nd::Var loss = nd::sum_all(nd::matmul(g.param(a), g.param(b)));
        return g.backward(loss);
    };
    const auto r = gradcheck::check({&a, &b}, loss_of, grads_of);
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("batched matmul with shared rhs gradient") {
    nd::Rng rng(3);
    nd::Tensor a = randn({2, 3, 4}, rng);
    nd::Tensor b = randn({4, 3}, rng);
    const auto build = [&](nd::Graph& g) {
        return nd::mean_all(nd::gelu(nd::matmul(g.param(a), g.param(b))));
    };
    const auto r = gradcheck::check(
        {&a, &b},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("softmax values: symmetry, shift invariance, overflow safety") {
    nd::Graph g;
    nd::Var a = nd::softmax(g.input(nd::Tensor({2}, {0, 0})), 0);
    CHECK(a.value()[0] == doctest::Approx(0.5).epsilon(1e-15));

    nd::Var big = nd::softmax(g.input(nd::Tensor({3}, {1000, 1000, 1000})), 0);
    for (int i = 0; i < 3; ++i) CHECK(big.value()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    nd::Tensor x({4}, {0.3, -1.2, 2.0, 0.7});
    nd::Tensor xs({4}, {0.3 + 5, -1.2 + 5, 2.0 + 5, 0.7 + 5});
    nd::Var base = nd::softmax(g.input(x), 0);
    nd::Var shifted = nd::softmax(g.input(xs), 0);
    double sum = 0;
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(base.value()[i] - shifted.value()[i]) < 1e-12);
        sum += base.value()[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax gradient matches central differences") {
    nd::Rng rng(4);
    nd::Tensor x = randn({3, 5}, rng);
    nd::Tensor w = randn({3, 5}, rng);  // weights to make the loss non-symmetric
    const auto build = [&](nd::Graph& g) {
        return nd::sum_all(nd::mul(nd::softmax(g.param(x), -1), g.input(w)));
    };
    const auto r = gradcheck::check(
        {&x},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("layer_norm values: constant and already-normalized input") {
    nd::Graph g;
    nd::Tensor gain = nd::Tensor::full({4}, 1.0);
    nd::Tensor bias = nd::Tensor::zeros({4});
    nd::Var c = nd::layer_norm(g.input(nd::Tensor({1, 4}, {3, 3, 3, 3})), g.input(gain), g.input(bias));
    for (int i = 0; i < 4; ++i) CHECK(c.value()[i] == doctest::Approx(0.0).epsilon(1e-12));

    nd::Tensor pm({1, 2}, {1, -1});
    nd::Tensor g2 = nd::Tensor::full({2}, 1.0);
    nd::Tensor b2 = nd::Tensor::zeros({2});
    nd::Var u = nd::layer_norm(g.input(pm), g.input(g2), g.input(b2));
    CHECK(u.value()[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(u.value()[1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm normalizes to mean 0 variance 1") {
    nd::Rng rng(5);
    nd::Graph g;
    const int n = 16;
    nd::Tensor x = randn({3, n}, rng, 2.0);
    nd::Var y = nd::layer_norm(g.input(x), g.input(nd::Tensor::full({n}, 1.0)), g.input(nd::Tensor::zeros({n})));
    for (int r = 0; r < 3; ++r) {
        double mean = 0, var = 0;
        for (int j = 0; j < n; ++j) mean += y.value()[r * n + j];
        mean /= n;
        for (int j = 0; j < n; ++j) {
            const double d = y.value()[r * n + j] - mean;
            var += d * d;
        }
        var /= n;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);  // eps in the denominator shifts var by ~1e-6
    }
}

TEST_CASE("layer_norm gradient matches central differences") {
    nd::Rng rng(6);
    nd::Tensor x = randn({2, 6}, rng);
    nd::Tensor gain = randn({6}, rng, 0.5);
    nd::Tensor bias = randn({6}, rng, 0.5);
    nd::Tensor w = randn({2, 6}, rng);
    const auto build = [&](nd::Graph& g) {
        return nd::sum_all(nd::mul(nd::layer_norm(g.param(x), g.param(gain), g.param(bias)), g.input(w)));
    };
    const auto r = gradcheck::check(
        {&x, &gain, &bias},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("gelu is zero at zero and matches finite differences") {
    nd::Graph g;
    CHECK(nd::gelu(g.input(nd::Tensor({1}, {0.0}))).value()[0] == 0.0);

    nd::Rng rng(7);
    nd::Tensor x = randn({20}, rng);
    const auto build = [&](nd::Graph& gg) { return nd::sum_all(nd::gelu(gg.param(x))); };
    const auto r = gradcheck::check(
        {&x},
        [&] {
            nd::Graph gg;
            return build(gg).value().item();
        },
        [&] {
            nd::Graph gg;
            return gg.backward(build(gg));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("conv3d of constant volume with unit 1x1x1 kernel, stride 2, subsamples") {
    nd::Graph g;
    nd::Tensor x = nd::Tensor::full({1, 1, 4, 4, 4}, 2.5);
    nd::Tensor k({1, 1, 1, 1, 1}, {1.0});
    nd::Var y = nd::conv3d(g.input(x), g.input(k), 2);
    CHECK(y.shape() == std::vector<int>{1, 1, 2, 2, 2});
    for (std::int64_t i = 0; i < y.value().numel(); ++i) CHECK(y.value()[i] == 2.5);
}

TEST_CASE("conv3d gradient matches central differences") {
    nd::Rng rng(8);
    nd::Tensor x = randn({1, 2, 4, 4, 4}, rng);
    nd::Tensor k = randn({3, 2, 3, 3, 3}, rng, 0.3);
    nd::Tensor b = randn({3}, rng, 0.2);
    const auto build = [&](nd::Graph& g) {
        return nd::mean_all(nd::gelu(nd::add_channelwise(nd::conv3d(g.param(x), g.param(k), 2), g.param(b))));
    };
    const auto r = gradcheck::check(
        {&x, &k, &b},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("upsample, embedding, permute, concat, broadcast gradients") {
    nd::Rng rng(9);
    nd::Tensor x = randn({1, 2, 2, 2, 2}, rng);
    nd::Tensor table = randn({5, 4}, rng);
    nd::Tensor q = randn({2, 3, 4}, rng);
    nd::Tensor s = randn({1, 3, 4}, rng);
    const auto build = [&](nd::Graph& g) {
        nd::Var up = nd::upsample_nearest3d(g.param(x), 2);
        nd::Var emb = nd::embedding_lookup(g.param(table), {1, 3, 1});
        nd::Var perm = nd::permute(g.param(q), {1, 0, 2});
        nd::Var cat = nd::concat({g.param(s), nd::reshape(g.param(q), {2, 3, 4})}, 0);
        nd::Var bro = nd::broadcast_axis(g.param(s), 0, 4);
        return nd::mean_all(nd::gelu(up)) + nd::mean_all(nd::gelu(emb)) + nd::mean_all(nd::gelu(perm)) +
               nd::mean_all(nd::gelu(cat)) + nd::mean_all(nd::gelu(bro));
    };
    const auto r = gradcheck::check(
        {&x, &table, &q, &s},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("linear, add_suffix, exp, scale gradients") {
    nd::Rng rng(10);
    nd::Tensor x = randn({2, 3, 4}, rng);
    nd::Tensor w = randn({4, 5}, rng);
    nd::Tensor b = randn({5}, rng);
    const auto build = [&](nd::Graph& g) {
        nd::Var lin = nd::linear(g.param(x), g.param(w), g.param(b));
        return nd::mean_all(nd::exp_op(nd::scale(lin, 0.3)));
    };
    const auto r = gradcheck::check(
        {&x, &w, &b},
        [&] {
            nd::Graph g;
            return build(g).value().item();
        },
        [&] {
            nd::Graph g;
            return g.backward(build(g));
        });
    CHECK(r.max_rel_err < 1e-6);
}
