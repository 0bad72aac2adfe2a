#pragma once

#include <vector>

#include "gentract/nd/graph.hpp"

namespace gentract::nd {

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

// Scalar affine and exponent.
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var exp_op(Var x);

/// Matrix product over the trailing two axes. Leading axes must match
/// exactly, or `b` may be rank-2 and is then shared across all leading
/// batches of `a`.
Var matmul(Var a, Var b);

/// Softmax along `axis` (negative counts from the back). Max-subtracted.
Var softmax(Var x, int axis);

/// Normalizes the last axis to zero mean / unit variance (biased estimator,
/// epsilon 1e-6 under the root), then applies gain and bias of shape {n}.
Var layer_norm(Var x, Var gain, Var bias);

Var gelu(Var x);

/// matmul(x, w) followed by a bias add broadcast over leading axes.
Var linear(Var x, Var w, Var b);

/// 3D convolution. x: (N, C_in, X, Y, Z); w: (C_out, C_in, k, k, k);
/// zero padding k/2, stride >= 1.
Var conv3d(Var x, Var w, int stride);

/// Adds b (shape {C}) to every spatial position of x (N, C, X, Y, Z).
Var add_channelwise(Var x, Var b);

/// Nearest-neighbour upsampling of the three trailing spatial axes.
Var upsample_nearest3d(Var x, int factor);

/// Gathers rows of `table` (R, D) at the given indices -> (len(rows), D).
Var embedding_lookup(Var table, const std::vector<int>& rows);

Var reshape(Var x, std::vector<int> shape);
Var permute(Var x, std::vector<int> axes);

/// Tiles an extent-1 axis to `times`.
Var broadcast_axis(Var x, int axis, int times);

/// a + b where b's shape is a trailing suffix of a's shape.
Var add_suffix(Var a, Var b);

Var concat(const std::vector<Var>& xs, int axis);

Var sum_all(Var x);
Var mean_all(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace gentract::nd
