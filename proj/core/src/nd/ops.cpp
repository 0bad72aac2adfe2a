#include "gentract/nd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "gentract/nd/parallel.hpp"

namespace gentract::nd {

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

Graph& same_graph(const char* op, std::initializer_list<Var> vs) {
    Graph* g = nullptr;
    for (const Var& v : vs) {
        if (v.graph == nullptr || v.id < 0) shape_error(op, "unbound Var");
        if (g == nullptr) g = v.graph;
        if (v.graph != g) shape_error(op, "operands from different graphs");
    }
    return *g;
}

int normalize_axis(const char* op, int axis, int rank) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) shape_error(op, "axis out of range");
    return axis;
}

struct AxisSplit {
    std::int64_t outer, len, inner;
};

AxisSplit split_at(const std::vector<int>& shape, int axis) {
    AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

// ---------------------------------------------------------------------------
// Raw matmul kernels. Row-parallel: every output row is produced by one
// worker with a fixed accumulation order, so results do not depend on the
// worker count.

void mm_nn(const double* a, const double* b, double* c, std::int64_t batches, std::int64_t m,
           std::int64_t k, std::int64_t n, bool shared_b) {
    parallel_for(batches * m, [=](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t bi = r / m, i = r % m;
            const double* arow = a + (bi * m + i) * k;
            const double* bmat = b + (shared_b ? 0 : bi * k * n);
            double* crow = c + (bi * m + i) * n;
            std::fill(crow, crow + n, 0.0);
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                const double* brow = bmat + kk * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// da = g (m,n) x b^T (n,k)
void mm_nt(const double* g, const double* b, double* da, std::int64_t batches, std::int64_t m,
           std::int64_t k, std::int64_t n, bool shared_b) {
    parallel_for(batches * m, [=](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t bi = r / m, i = r % m;
            const double* grow = g + (bi * m + i) * n;
            const double* bmat = b + (shared_b ? 0 : bi * k * n);
            double* darow = da + (bi * m + i) * k;
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double* brow = bmat + kk * n;
                double acc = 0.0;
                for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                darow[kk] = acc;
            }
        }
    });
}

// db = a^T (k,m) x g (m,n); accumulates over batches when b is shared.
void mm_tn(const double* a, const double* g, double* db, std::int64_t batches, std::int64_t m,
           std::int64_t k, std::int64_t n, bool shared_b) {
    if (shared_b) {
        parallel_for(k, [=](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t kk = lo; kk < hi; ++kk) {
                double* dbrow = db + kk * n;
                for (std::int64_t bi = 0; bi < batches; ++bi) {
                    const double* amat = a + bi * m * k;
                    const double* gmat = g + bi * m * n;
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double av = amat[i * k + kk];
                        if (av == 0.0) continue;
                        const double* grow = gmat + i * n;
                        for (std::int64_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
        });
    } else {
        parallel_for(batches * k, [=](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                const std::int64_t bi = r / k, kk = r % k;
                const double* amat = a + bi * m * k;
                const double* gmat = g + bi * m * n;
                double* dbrow = db + (bi * k + kk) * n;
                for (std::int64_t i = 0; i < m; ++i) {
                    const double av = amat[i * k + kk];
                    const double* grow = gmat + i * n;
                    for (std::int64_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                }
            }
        });
    }
}

Var unary_elementwise(const char* op, Var x, double (*f)(double), double (*df)(double)) {
    Graph& g = same_graph(op, {x});
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    const std::int64_t n = xv.numel();
    const double* in = xv.data();
    double* o = out.data();
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) o[i] = f(in[i]);
    });
    const int xid = x.id;
    int id = g.add_node(op, std::move(out), {xid},
                        [xid, df](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            const Tensor& xin = gr.value(xid);
                            Tensor& gx = gr.grad_buf(xid, grads);
                            const std::int64_t nn = xin.numel();
                            for (std::int64_t i = 0; i < nn; ++i) gx[i] += go[i] * df(xin[i]);
                        });
    return Var{&g, id};
}

}  // namespace

// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    Graph& g = same_graph("add", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv))
        shape_error("add", Tensor::shape_str(av.shape()) + " vs " + Tensor::shape_str(bv.shape()));
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
    const int aid = a.id, bid = b.id;
    int id = g.add_node("add", std::move(out), {aid, bid},
                        [aid, bid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            if (gr.requires_grad(aid)) {
                                Tensor& ga = gr.grad_buf(aid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
                            }
                            if (gr.requires_grad(bid)) {
                                Tensor& gb = gr.grad_buf(bid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
                            }
                        });
    return Var{&g, id};
}

Var sub(Var a, Var b) {
    Graph& g = same_graph("sub", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv))
        shape_error("sub", Tensor::shape_str(av.shape()) + " vs " + Tensor::shape_str(bv.shape()));
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
    const int aid = a.id, bid = b.id;
    int id = g.add_node("sub", std::move(out), {aid, bid},
                        [aid, bid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            if (gr.requires_grad(aid)) {
                                Tensor& ga = gr.grad_buf(aid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
                            }
                            if (gr.requires_grad(bid)) {
                                Tensor& gb = gr.grad_buf(bid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
                            }
                        });
    return Var{&g, id};
}

Var mul(Var a, Var b) {
    Graph& g = same_graph("mul", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv))
        shape_error("mul", Tensor::shape_str(av.shape()) + " vs " + Tensor::shape_str(bv.shape()));
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
    const int aid = a.id, bid = b.id;
    int id = g.add_node("mul", std::move(out), {aid, bid},
                        [aid, bid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            const Tensor& avv = gr.value(aid);
                            const Tensor& bvv = gr.value(bid);
                            if (gr.requires_grad(aid)) {
                                Tensor& ga = gr.grad_buf(aid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * bvv[i];
                            }
                            if (gr.requires_grad(bid)) {
                                Tensor& gb = gr.grad_buf(bid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * avv[i];
                            }
                        });
    return Var{&g, id};
}

Var scale(Var x, double c) {
    Graph& g = same_graph("scale", {x});
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] * c;
    const int xid = x.id;
    int id = g.add_node("scale", std::move(out), {xid},
                        [xid, c](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * c;
                        });
    return Var{&g, id};
}

Var add_scalar(Var x, double c) {
    Graph& g = same_graph("add_scalar", {x});
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] + c;
    const int xid = x.id;
    int id = g.add_node("add_scalar", std::move(out), {xid},
                        [xid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
                        });
    return Var{&g, id};
}

Var exp_op(Var x) {
    Graph& g = same_graph("exp", {x});
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) out[i] = std::exp(xv[i]);
    const int xid = x.id;
    int id = g.add_node("exp", std::move(out), {xid},
                        [xid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            const Tensor& yv = gr.value(self);
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * yv[i];
                        });
    return Var{&g, id};
}

Var gelu(Var x) {
    return unary_elementwise(
        "gelu", x, +[](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
        +[](double v) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
}

Var matmul(Var a, Var b) {
    Graph& g = same_graph("matmul", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() < 2 || bv.rank() < 2) shape_error("matmul", "operands must have rank >= 2");
    const bool shared_b = bv.rank() == 2 && av.rank() > 2;
    if (!shared_b && av.rank() != bv.rank()) shape_error("matmul", "rank mismatch");

    const int ar = av.rank();
    const std::int64_t m = av.dim(ar - 2), k = av.dim(ar - 1);
    const std::int64_t bk = bv.dim(bv.rank() - 2), n = bv.dim(bv.rank() - 1);
    if (k != bk)
        shape_error("matmul", "inner extents disagree: " + Tensor::shape_str(av.shape()) + " x " +
                                  Tensor::shape_str(bv.shape()));
    std::vector<int> lead(av.shape().begin(), av.shape().end() - 2);
    if (!shared_b) {
        std::vector<int> blead(bv.shape().begin(), bv.shape().end() - 2);
        if (lead != blead) shape_error("matmul", "leading axes disagree");
    }
    std::int64_t batches = 1;
    for (int e : lead) batches *= e;

    std::vector<int> out_shape = lead;
    out_shape.push_back(static_cast<int>(m));
    out_shape.push_back(static_cast<int>(n));
    Tensor out(out_shape);
    mm_nn(av.data(), bv.data(), out.data(), batches, m, k, n, shared_b);

    const int aid = a.id, bid = b.id;
    int id = g.add_node(
        "matmul", std::move(out), {aid, bid},
        [aid, bid, batches, m, k, n, shared_b](const Graph& gr, int self, std::vector<Tensor>& grads) {
            const Tensor& go = grads[static_cast<std::size_t>(self)];
            const Tensor& avv = gr.value(aid);
            const Tensor& bvv = gr.value(bid);
            if (gr.requires_grad(aid)) {
                Tensor da(avv.shape());
                mm_nt(go.data(), bvv.data(), da.data(), batches, m, k, n, shared_b);
                Tensor& ga = gr.grad_buf(aid, grads);
                for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += da[i];
            }
            if (gr.requires_grad(bid)) {
                Tensor db(bvv.shape());
                mm_tn(avv.data(), go.data(), db.data(), batches, m, k, n, shared_b);
                Tensor& gb = gr.grad_buf(bid, grads);
                for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] += db[i];
            }
        });
    return Var{&g, id};
}

Var softmax(Var x, int axis) {
    Graph& g = same_graph("softmax", {x});
    const Tensor& xv = x.value();
    const int ax = normalize_axis("softmax", axis, xv.rank());
    const AxisSplit sp = split_at(xv.shape(), ax);
    Tensor out(xv.shape());
    const double* in = xv.data();
    double* o = out.data();
    parallel_for(sp.outer * sp.inner, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t ou = r / sp.inner, ii = r % sp.inner;
            const std::int64_t base = ou * sp.len * sp.inner + ii;
            double mx = in[base];
            for (std::int64_t t = 1; t < sp.len; ++t) mx = std::max(mx, in[base + t * sp.inner]);
            double denom = 0.0;
            for (std::int64_t t = 0; t < sp.len; ++t) {
                const double e = std::exp(in[base + t * sp.inner] - mx);
                o[base + t * sp.inner] = e;
                denom += e;
            }
            const double inv = 1.0 / denom;
            for (std::int64_t t = 0; t < sp.len; ++t) o[base + t * sp.inner] *= inv;
        }
    });
    const int xid = x.id;
    int id = g.add_node(
        "softmax", std::move(out), {xid},
        [xid, sp](const Graph& gr, int self, std::vector<Tensor>& grads) {
            const Tensor& go = grads[static_cast<std::size_t>(self)];
            const Tensor& yv = gr.value(self);
            Tensor& gx = gr.grad_buf(xid, grads);
            const double* y = yv.data();
            const double* dy = go.data();
            double* dx = gx.data();
            parallel_for(sp.outer * sp.inner, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t r = lo; r < hi; ++r) {
                    const std::int64_t ou = r / sp.inner, ii = r % sp.inner;
                    const std::int64_t base = ou * sp.len * sp.inner + ii;
                    double dot = 0.0;
                    for (std::int64_t t = 0; t < sp.len; ++t)
                        dot += dy[base + t * sp.inner] * y[base + t * sp.inner];
                    for (std::int64_t t = 0; t < sp.len; ++t) {
                        const std::int64_t p = base + t * sp.inner;
                        dx[p] += y[p] * (dy[p] - dot);
                    }
                }
            });
        });
    return Var{&g, id};
}

Var layer_norm(Var x, Var gain, Var bias) {
    Graph& g = same_graph("layer_norm", {x, gain, bias});
    const Tensor& xv = x.value();
    const int n = xv.dim(-1);
    if (n < 2) shape_error("layer_norm", "normalized axis extent must be >= 2");
    if (gain.value().shape() != std::vector<int>{n} || bias.value().shape() != std::vector<int>{n})
        shape_error("layer_norm", "gain/bias must have shape {n}");
    const std::int64_t rows = xv.numel() / n;
    Tensor out(xv.shape());
    const double* in = xv.data();
    const double* gm = gain.value().data();
    const double* bt = bias.value().data();
    double* o = out.data();
    parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const double* row = in + r * n;
            double mean = 0.0;
            for (int j = 0; j < n; ++j) mean += row[j];
            mean /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
            var /= n;
            const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            double* orow = o + r * n;
            for (int j = 0; j < n; ++j) orow[j] = gm[j] * ((row[j] - mean) * inv) + bt[j];
        }
    });
    const int xid = x.id, gid = gain.id, bid = bias.id;
    int id = g.add_node(
        "layer_norm", std::move(out), {xid, gid, bid},
        [xid, gid, bid, n, rows](const Graph& gr, int self, std::vector<Tensor>& grads) {
            const Tensor& go = grads[static_cast<std::size_t>(self)];
            const Tensor& xin = gr.value(xid);
            const double* in = xin.data();
            const double* gm = gr.value(gid).data();
            const double* dy = go.data();
            if (gr.requires_grad(gid) || gr.requires_grad(bid)) {
                Tensor& gg = gr.grad_buf(gid, grads);
                Tensor& gb = gr.grad_buf(bid, grads);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* row = in + r * n;
                    double mean = 0.0;
                    for (int j = 0; j < n; ++j) mean += row[j];
                    mean /= n;
                    double var = 0.0;
                    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
                    var /= n;
                    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
                    for (int j = 0; j < n; ++j) {
                        const double xh = (row[j] - mean) * inv;
                        gg[j] += dy[r * n + j] * xh;
                        gb[j] += dy[r * n + j];
                    }
                }
            }
            if (gr.requires_grad(xid)) {
                Tensor& gx = gr.grad_buf(xid, grads);
                double* dx = gx.data();
                parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t r = lo; r < hi; ++r) {
                        const double* row = in + r * n;
                        double mean = 0.0;
                        for (int j = 0; j < n; ++j) mean += row[j];
                        mean /= n;
                        double var = 0.0;
                        for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
                        var /= n;
                        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
                        double sum_dg = 0.0, sum_dgx = 0.0;
                        for (int j = 0; j < n; ++j) {
                            const double dg = dy[r * n + j] * gm[j];
                            const double xh = (row[j] - mean) * inv;
                            sum_dg += dg;
                            sum_dgx += dg * xh;
                        }
                        const double m1 = sum_dg / n, m2 = sum_dgx / n;
                        for (int j = 0; j < n; ++j) {
                            const double dg = dy[r * n + j] * gm[j];
                            const double xh = (row[j] - mean) * inv;
                            dx[r * n + j] += inv * (dg - m1 - xh * m2);
                        }
                    }
                });
            }
        });
    return Var{&g, id};
}

Var linear(Var x, Var w, Var b) { return add_suffix(matmul(x, w), b); }

Var conv3d(Var x, Var w, int stride) {
    Graph& g = same_graph("conv3d", {x, w});
    if (stride < 1) shape_error("conv3d", "stride must be >= 1");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.rank() != 5 || wv.rank() != 5) shape_error("conv3d", "x must be (N,C,X,Y,Z), w (Co,Ci,k,k,k)");
    const int N = xv.dim(0), Ci = xv.dim(1), X = xv.dim(2), Y = xv.dim(3), Z = xv.dim(4);
    const int Co = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != Ci) shape_error("conv3d", "kernel input channels disagree with x");
    if (wv.dim(3) != k || wv.dim(4) != k) shape_error("conv3d", "kernel must be cubic");
    const int p = k / 2;
    const auto out_extent = [&](int e) { return (e + 2 * p - k) / stride + 1; };
    const int Xo = out_extent(X), Yo = out_extent(Y), Zo = out_extent(Z);
    if (Xo < 1 || Yo < 1 || Zo < 1) shape_error("conv3d", "output extents collapse to zero");

    Tensor out({N, Co, Xo, Yo, Zo});
    const double* in = xv.data();
    const double* ker = wv.data();
    double* o = out.data();
    const auto xat = [=](int nn, int c, int ix, int iy, int iz) {
        return in[(((static_cast<std::int64_t>(nn) * Ci + c) * X + ix) * Y + iy) * Z + iz];
    };
    parallel_for(static_cast<std::int64_t>(N) * Co, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const int nn = static_cast<int>(r / Co), co = static_cast<int>(r % Co);
            double* oc = o + ((static_cast<std::int64_t>(nn) * Co + co) * Xo) * Yo * Zo;
            std::int64_t oi = 0;
            for (int ox = 0; ox < Xo; ++ox)
                for (int oy = 0; oy < Yo; ++oy)
                    for (int oz = 0; oz < Zo; ++oz, ++oi) {
                        double acc = 0.0;
                        for (int ci = 0; ci < Ci; ++ci)
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * stride - p + kx;
                                if (ix < 0 || ix >= X) continue;
                                for (int ky = 0; ky < k; ++ky) {
                                    const int iy = oy * stride - p + ky;
                                    if (iy < 0 || iy >= Y) continue;
                                    for (int kz = 0; kz < k; ++kz) {
                                        const int iz = oz * stride - p + kz;
                                        if (iz < 0 || iz >= Z) continue;
                                        acc += ker[(((static_cast<std::int64_t>(co) * Ci + ci) * k + kx) * k + ky) * k + kz] *
                                               xat(nn, ci, ix, iy, iz);
                                    }
                                }
                            }
                        oc[oi] = acc;
                    }
        }
    });

    const int xid = x.id, wid = w.id;
    int id = g.add_node(
        "conv3d", std::move(out), {xid, wid},
        [xid, wid, stride, N, Ci, X, Y, Z, Co, k, p, Xo, Yo, Zo](const Graph& gr, int self,
                                                                 std::vector<Tensor>& grads) {
            const Tensor& go = grads[static_cast<std::size_t>(self)];
            const double* dy = go.data();
            const double* in = gr.value(xid).data();
            const double* ker = gr.value(wid).data();
            const auto dyat = [=](int nn, int co, int ox, int oy, int oz) {
                return dy[(((static_cast<std::int64_t>(nn) * Co + co) * Xo + ox) * Yo + oy) * Zo + oz];
            };
            if (gr.requires_grad(xid)) {
                Tensor& gx = gr.grad_buf(xid, grads);
                double* dx = gx.data();
                parallel_for(static_cast<std::int64_t>(N) * Ci, [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t r = lo; r < hi; ++r) {
                        const int nn = static_cast<int>(r / Ci), ci = static_cast<int>(r % Ci);
                        for (int ix = 0; ix < X; ++ix)
                            for (int iy = 0; iy < Y; ++iy)
                                for (int iz = 0; iz < Z; ++iz) {
                                    double acc = 0.0;
                                    for (int co = 0; co < Co; ++co)
                                        for (int kx = 0; kx < k; ++kx) {
                                            const int num_x = ix + p - kx;
                                            if (num_x < 0 || num_x % stride) continue;
                                            const int ox = num_x / stride;
                                            if (ox >= Xo) continue;
                                            for (int ky = 0; ky < k; ++ky) {
                                                const int num_y = iy + p - ky;
                                                if (num_y < 0 || num_y % stride) continue;
                                                const int oy = num_y / stride;
                                                if (oy >= Yo) continue;
                                                for (int kz = 0; kz < k; ++kz) {
                                                    const int num_z = iz + p - kz;
                                                    if (num_z < 0 || num_z % stride) continue;
                                                    const int oz = num_z / stride;
                                                    if (oz >= Zo) continue;
                                                    acc += ker[(((static_cast<std::int64_t>(co) * Ci + ci) * k + kx) * k + ky) * k + kz] *
                                                           dyat(nn, co, ox, oy, oz);
                                                }
                                            }
                                        }
                                    dx[(((static_cast<std::int64_t>(nn) * Ci + ci) * X + ix) * Y + iy) * Z + iz] += acc;
                                }
                    }
                });
            }
            if (gr.requires_grad(wid)) {
                Tensor& gw = gr.grad_buf(wid, grads);
                double* dw = gw.data();
                parallel_for(Co, [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t co = lo; co < hi; ++co) {
                        for (int ci = 0; ci < Ci; ++ci)
                            for (int kx = 0; kx < k; ++kx)
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kz = 0; kz < k; ++kz) {
                                        double acc = 0.0;
                                        for (int nn = 0; nn < N; ++nn)
                                            for (int ox = 0; ox < Xo; ++ox) {
                                                const int ix = ox * stride - p + kx;
                                                if (ix < 0 || ix >= X) continue;
                                                for (int oy = 0; oy < Yo; ++oy) {
                                                    const int iy = oy * stride - p + ky;
                                                    if (iy < 0 || iy >= Y) continue;
                                                    for (int oz = 0; oz < Zo; ++oz) {
                                                        const int iz = oz * stride - p + kz;
                                                        if (iz < 0 || iz >= Z) continue;
                                                        acc += in[(((static_cast<std::int64_t>(nn) * Ci + ci) * X + ix) * Y + iy) * Z + iz] *
                                                               dyat(nn, static_cast<int>(co), ox, oy, oz);
                                                    }
                                                }
                                            }
                                        dw[(((co * Ci + ci) * k + kx) * k + ky) * k + kz] += acc;
                                    }
                    }
                });
            }
        });
    return Var{&g, id};
}

Var add_channelwise(Var x, Var b) {
    Graph& g = same_graph("add_channelwise", {x, b});
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (xv.rank() < 2) shape_error("add_channelwise", "x must have a channel axis at position 1");
    const int C = xv.dim(1);
    if (bv.shape() != std::vector<int>{C}) shape_error("add_channelwise", "bias must have shape {C}");
    const int N = xv.dim(0);
    std::int64_t spatial = 1;
    for (int i = 2; i < xv.rank(); ++i) spatial *= xv.dim(i);
    Tensor out(xv.shape());
    for (int nn = 0; nn < N; ++nn)
        for (int c = 0; c < C; ++c) {
            const std::int64_t base = (static_cast<std::int64_t>(nn) * C + c) * spatial;
            for (std::int64_t s = 0; s < spatial; ++s) out[base + s] = xv[base + s] + bv[c];
        }
    const int xid = x.id, bid = b.id;
    int id = g.add_node("add_channelwise", std::move(out), {xid, bid},
                        [xid, bid, N, C, spatial](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            if (gr.requires_grad(xid)) {
                                Tensor& gx = gr.grad_buf(xid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
                            }
                            if (gr.requires_grad(bid)) {
                                Tensor& gb = gr.grad_buf(bid, grads);
                                for (int nn = 0; nn < N; ++nn)
                                    for (int c = 0; c < C; ++c) {
                                        const std::int64_t base = (static_cast<std::int64_t>(nn) * C + c) * spatial;
                                        double acc = 0.0;
                                        for (std::int64_t s = 0; s < spatial; ++s) acc += go[base + s];
                                        gb[c] += acc;
                                    }
                            }
                        });
    return Var{&g, id};
}

Var upsample_nearest3d(Var x, int factor) {
    Graph& g = same_graph("upsample_nearest3d", {x});
    if (factor < 1) shape_error("upsample_nearest3d", "factor must be >= 1");
    const Tensor& xv = x.value();
    if (xv.rank() != 5) shape_error("upsample_nearest3d", "x must be (N,C,X,Y,Z)");
    const int N = xv.dim(0), C = xv.dim(1), X = xv.dim(2), Y = xv.dim(3), Z = xv.dim(4);
    const int Xo = X * factor, Yo = Y * factor, Zo = Z * factor;
    Tensor out({N, C, Xo, Yo, Zo});
    const double* in = xv.data();
    double* o = out.data();
    parallel_for(static_cast<std::int64_t>(N) * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const double* ic = in + r * X * Y * Z;
            double* oc = o + r * static_cast<std::int64_t>(Xo) * Yo * Zo;
            std::int64_t oi = 0;
            for (int ox = 0; ox < Xo; ++ox)
                for (int oy = 0; oy < Yo; ++oy)
                    for (int oz = 0; oz < Zo; ++oz, ++oi)
                        oc[oi] = ic[(static_cast<std::int64_t>(ox / factor) * Y + oy / factor) * Z + oz / factor];
        }
    });
    const int xid = x.id;
    int id = g.add_node("upsample_nearest3d", std::move(out), {xid},
                        [xid, factor, N, C, X, Y, Z, Xo, Yo, Zo](const Graph& gr, int self,
                                                                 std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            const double* dy = go.data();
                            double* dx = gx.data();
                            for (std::int64_t r = 0; r < static_cast<std::int64_t>(N) * C; ++r) {
                                const double* dyc = dy + r * static_cast<std::int64_t>(Xo) * Yo * Zo;
                                double* dxc = dx + r * static_cast<std::int64_t>(X) * Y * Z;
                                std::int64_t oi = 0;
                                for (int ox = 0; ox < Xo; ++ox)
                                    for (int oy = 0; oy < Yo; ++oy)
                                        for (int oz = 0; oz < Zo; ++oz, ++oi)
                                            dxc[(static_cast<std::int64_t>(ox / factor) * Y + oy / factor) * Z +
                                                oz / factor] += dyc[oi];
                            }
                        });
    return Var{&g, id};
}

Var embedding_lookup(Var table, const std::vector<int>& rows) {
    Graph& g = same_graph("embedding_lookup", {table});
    const Tensor& tv = table.value();
    if (tv.rank() != 2) shape_error("embedding_lookup", "table must be (rows, dim)");
    const int R = tv.dim(0), D = tv.dim(1);
    for (int r : rows)
        if (r < 0 || r >= R) shape_error("embedding_lookup", "index " + std::to_string(r) + " out of range");
    Tensor out({static_cast<int>(rows.size()), D});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + i * D, tv.data() + static_cast<std::int64_t>(rows[i]) * D,
                    sizeof(double) * static_cast<std::size_t>(D));
    const int tid = table.id;
    int id = g.add_node("embedding_lookup", std::move(out), {tid},
                        [tid, rows, D](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gt = gr.grad_buf(tid, grads);
                            for (std::size_t i = 0; i < rows.size(); ++i)
                                for (int j = 0; j < D; ++j)
                                    gt[static_cast<std::int64_t>(rows[i]) * D + j] += go[static_cast<std::int64_t>(i) * D + j];
                        });
    return Var{&g, id};
}

Var reshape(Var x, std::vector<int> shape) {
    Graph& g = same_graph("reshape", {x});
    const Tensor& xv = x.value();
    if (shape_numel(shape) != xv.numel()) shape_error("reshape", "element count changes");
    Tensor out(std::move(shape), xv.vec());
    const int xid = x.id;
    int id = g.add_node("reshape", std::move(out), {xid},
                        [xid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
                        });
    return Var{&g, id};
}

namespace {

std::vector<std::int64_t> row_major_strides(const std::vector<int>& shape) {
    std::vector<std::int64_t> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        s[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    return s;
}

void permute_into(const Tensor& src, Tensor& dst, const std::vector<int>& axes) {
    // dst multi-index d maps to src index d applied through axes.
    const auto dst_shape = dst.shape();
    const auto src_strides = row_major_strides(src.shape());
    const int rank = src.rank();
    std::vector<std::int64_t> dst_to_src(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i)
        dst_to_src[static_cast<std::size_t>(i)] = src_strides[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
    const double* in = src.data();
    double* out = dst.data();
    parallel_for(dst.numel(), [&](std::int64_t lo, std::int64_t hi) {
        std::vector<int> idx(static_cast<std::size_t>(rank));
        for (std::int64_t flat = lo; flat < hi; ++flat) {
            std::int64_t rem = flat;
            std::int64_t sidx = 0;
            for (int i = rank - 1; i >= 0; --i) {
                const int e = dst_shape[static_cast<std::size_t>(i)];
                idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % e);
                rem /= e;
                sidx += idx[static_cast<std::size_t>(i)] * dst_to_src[static_cast<std::size_t>(i)];
            }
            out[flat] = in[sidx];
        }
    });
}

}  // namespace

Var permute(Var x, std::vector<int> axes) {
    Graph& g = same_graph("permute", {x});
    const Tensor& xv = x.value();
    const int rank = xv.rank();
    if (static_cast<int>(axes.size()) != rank) shape_error("permute", "axes size must equal rank");
    std::vector<bool> seen(static_cast<std::size_t>(rank), false);
    std::vector<int> out_shape(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) {
        const int a = axes[static_cast<std::size_t>(i)];
        if (a < 0 || a >= rank || seen[static_cast<std::size_t>(a)]) shape_error("permute", "invalid axes");
        seen[static_cast<std::size_t>(a)] = true;
        out_shape[static_cast<std::size_t>(i)] = xv.dim(a);
    }
    Tensor out(out_shape);
    permute_into(xv, out, axes);
    std::vector<int> inverse(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) inverse[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])] = i;
    const int xid = x.id;
    int id = g.add_node("permute", std::move(out), {xid},
                        [xid, inverse](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor back(gr.value(xid).shape());
                            permute_into(go, back, inverse);
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < back.numel(); ++i) gx[i] += back[i];
                        });
    return Var{&g, id};
}

Var broadcast_axis(Var x, int axis, int times) {
    Graph& g = same_graph("broadcast_axis", {x});
    const Tensor& xv = x.value();
    const int ax = normalize_axis("broadcast_axis", axis, xv.rank());
    if (xv.dim(ax) != 1) shape_error("broadcast_axis", "axis extent must be 1");
    if (times < 1) shape_error("broadcast_axis", "times must be >= 1");
    const AxisSplit sp = split_at(xv.shape(), ax);
    std::vector<int> out_shape = xv.shape();
    out_shape[static_cast<std::size_t>(ax)] = times;
    Tensor out(out_shape);
    for (std::int64_t ou = 0; ou < sp.outer; ++ou)
        for (int t = 0; t < times; ++t)
            std::memcpy(out.data() + (ou * times + t) * sp.inner, xv.data() + ou * sp.inner,
                        sizeof(double) * static_cast<std::size_t>(sp.inner));
    const int xid = x.id;
    int id = g.add_node("broadcast_axis", std::move(out), {xid},
                        [xid, sp, times](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t ou = 0; ou < sp.outer; ++ou)
                                for (int t = 0; t < times; ++t) {
                                    const double* src = go.data() + (ou * times + t) * sp.inner;
                                    double* dst = gx.data() + ou * sp.inner;
                                    for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                                }
                        });
    return Var{&g, id};
}

Var add_suffix(Var a, Var b) {
    Graph& g = same_graph("add_suffix", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (bv.rank() > av.rank()) shape_error("add_suffix", "b rank exceeds a rank");
    for (int i = 0; i < bv.rank(); ++i)
        if (bv.dim(i) != av.dim(av.rank() - bv.rank() + i))
            shape_error("add_suffix", "b shape is not a trailing suffix of a shape");
    const std::int64_t bn = bv.numel();
    const std::int64_t lead = av.numel() / bn;
    Tensor out(av.shape());
    for (std::int64_t l = 0; l < lead; ++l)
        for (std::int64_t i = 0; i < bn; ++i) out[l * bn + i] = av[l * bn + i] + bv[i];
    const int aid = a.id, bid = b.id;
    int id = g.add_node("add_suffix", std::move(out), {aid, bid},
                        [aid, bid, lead, bn](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            if (gr.requires_grad(aid)) {
                                Tensor& ga = gr.grad_buf(aid, grads);
                                for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
                            }
                            if (gr.requires_grad(bid)) {
                                Tensor& gb = gr.grad_buf(bid, grads);
                                for (std::int64_t l = 0; l < lead; ++l)
                                    for (std::int64_t i = 0; i < bn; ++i) gb[i] += go[l * bn + i];
                            }
                        });
    return Var{&g, id};
}

Var concat(const std::vector<Var>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    Graph& g = *xs.front().graph;
    for (const Var& v : xs) same_graph("concat", {xs.front(), v});
    const int rank = xs.front().value().rank();
    const int ax = normalize_axis("concat", axis, rank);
    int total = 0;
    for (const Var& v : xs) {
        const Tensor& t = v.value();
        if (t.rank() != rank) shape_error("concat", "rank mismatch");
        for (int i = 0; i < rank; ++i)
            if (i != ax && t.dim(i) != xs.front().value().dim(i)) shape_error("concat", "extent mismatch off-axis");
        total += t.dim(ax);
    }
    std::vector<int> out_shape = xs.front().value().shape();
    out_shape[static_cast<std::size_t>(ax)] = total;
    const AxisSplit osp = split_at(out_shape, ax);
    Tensor out(out_shape);
    std::vector<int> ids;
    std::vector<int> lens;
    int offset = 0;
    for (const Var& v : xs) {
        const Tensor& t = v.value();
        const AxisSplit sp = split_at(t.shape(), ax);
        for (std::int64_t ou = 0; ou < sp.outer; ++ou)
            std::memcpy(out.data() + (ou * total + offset) * osp.inner, t.data() + ou * sp.len * sp.inner,
                        sizeof(double) * static_cast<std::size_t>(sp.len * sp.inner));
        ids.push_back(v.id);
        lens.push_back(static_cast<int>(sp.len));
        offset += static_cast<int>(sp.len);
    }
    int id = g.add_node("concat", std::move(out), ids,
                        [ids, lens, osp, total](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const Tensor& go = grads[static_cast<std::size_t>(self)];
                            int off = 0;
                            for (std::size_t part = 0; part < ids.size(); ++part) {
                                const int len = lens[part];
                                if (gr.requires_grad(ids[part])) {
                                    Tensor& gx = gr.grad_buf(ids[part], grads);
                                    for (std::int64_t ou = 0; ou < osp.outer; ++ou) {
                                        const double* src = go.data() + (ou * total + off) * osp.inner;
                                        double* dst = gx.data() + ou * len * osp.inner;
                                        for (std::int64_t i = 0; i < len * osp.inner; ++i) dst[i] += src[i];
                                    }
                                }
                                off += len;
                            }
                        });
    return Var{&g, id};
}

Var sum_all(Var x) {
    Graph& g = same_graph("sum_all", {x});
    const Tensor& xv = x.value();
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
    const int xid = x.id;
    int id = g.add_node("sum_all", Tensor::scalar(acc), {xid},
                        [xid](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const double go = grads[static_cast<std::size_t>(self)][0];
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += go;
                        });
    return Var{&g, id};
}

Var mean_all(Var x) {
    Graph& g = same_graph("mean_all", {x});
    const Tensor& xv = x.value();
    const double inv = 1.0 / static_cast<double>(xv.numel());
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
    const int xid = x.id;
    int id = g.add_node("mean_all", Tensor::scalar(acc * inv), {xid},
                        [xid, inv](const Graph& gr, int self, std::vector<Tensor>& grads) {
                            const double go = grads[static_cast<std::size_t>(self)][0] * inv;
                            Tensor& gx = gr.grad_buf(xid, grads);
                            for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += go;
                        });
    return Var{&g, id};
}

}  // namespace gentract::nd
