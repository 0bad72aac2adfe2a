#include <doctest.h>

#include <cmath>

#include "gentract/nd/adam.hpp"
#include "gentract/nd/ops.hpp"

using namespace gentract;

TEST_CASE("adam with zero gradient leaves fresh parameters unchanged") {
    nd::Tensor p({3}, {1, 2, 3});
    nd::Adam opt({&p}, {});
    const nd::Tensor zero = nd::Tensor::zeros({3});
    opt.step(std::vector<const nd::Tensor*>{&zero});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);
    CHECK(p[2] == 3.0);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("one step on f(x)=x^2 from x=1: moves toward 0, |dx| <= lr") {
    nd::Tensor x({1}, {1.0});
    nd::AdamConfig cfg;
    cfg.lr = 0.1;
    nd::Adam opt({&x}, cfg);
    const nd::Tensor grad({1}, {2.0});  // d/dx x^2 at 1
    opt.step(std::vector<const nd::Tensor*>{&grad});
    CHECK(x[0] < 1.0);
    CHECK(std::abs(1.0 - x[0]) <= cfg.lr + 1e-12);
}

TEST_CASE("500 adam steps on a 2d quadratic reach loss < 1e-6") {
    // f(x, y) = x^2 + 4 y^2, minimum 0 at the origin.
    nd::Tensor p({2}, {1.0, -2.0});
    nd::AdamConfig cfg;
    cfg.lr = 0.05;
    nd::Adam opt({&p}, cfg);
    double loss = 0.0;
    for (int i = 0; i < 500; ++i) {
        nd::Graph g;
        nd::Var v = g.param(p);
        nd::Tensor scale_diag({2}, {1.0, 2.0});
        nd::Var scaled = nd::mul(v, g.input(scale_diag));
        nd::Var l = nd::sum_all(nd::mul(scaled, scaled));
        loss = l.value().item();
        opt.step(g.backward(l));
    }
    CHECK(loss < 1e-6);
}

TEST_CASE("adam rejects mismatched gradient shapes") {
    nd::Tensor p({2}, {1, 2});
    nd::Adam opt({&p}, {});
    const nd::Tensor bad = nd::Tensor::zeros({3});
    CHECK_THROWS(opt.step(std::vector<const nd::Tensor*>{&bad}));
}
