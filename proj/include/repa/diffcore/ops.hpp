#pragma once
// Primitive differentiable operations. All shapes are explicit: apart from
// scalar-tensor arithmetic there is no implicit broadcasting. Row-repeating
// adds are separate, named operations.

#include <cstddef>

#include "repa/diffcore/graph.hpp"

namespace repa::diffcore {

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Scalar-tensor.
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
// Elementwise product with a fixed (non-differentiable) tensor of equal shape.
Var mask(Var a, const Tensor& m);

Var square(Var a);
Var relu(Var a);
// tanh approximation of GELU.
Var gelu(Var a);
Var sin(Var a);
Var cos(Var a);

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// x[R,D] + t[T,D] where row r receives t[r % T]. T == 1 is a bias add.
Var add_tiled(Var x, Var t);
// x[R,D] + g[G,D] where row r receives g[r / (R/G)].
Var add_grouped(Var x, Var g);
// For each consecutive group of N rows of x[B*N, D]: w[N,N] * x_b.
Var token_mix(Var w, Var x);
// y[g] = x[g] * w[g] for x[G,K], w[G,K,M] -> [G,M].
Var grouped_matmul(Var x, Var w);

// Spatial ops on tensors whose last two dims are (H, W); leading dims batch.
// True 2-D convolution with an odd-sized kernel, zero padding, same size out.
Var conv2d(Var x, const Tensor& kernel);
Var avg_pool(Var x, std::size_t factor);
Var upsample_nearest(Var x, std::size_t factor);

Var reshape(Var x, Shape shape);
// x[B, H*W] (or [H,W] for B=1) -> [B*N, s*s] with N = (H/s)*(W/s), patches in
// row-major grid order and pixels row-major within the patch.
Var patchify(Var x, std::size_t height, std::size_t width, std::size_t side);
// Inverse of patchify: [B*N, s*s] -> [B, H*W].
Var unpatchify(Var x, std::size_t height, std::size_t width, std::size_t side);

Var sum(Var x);
Var mean(Var x);
Var l2norm(Var x);
// Per-row cosine similarity of a[R,D] and b[R,D] -> [R].
Var cosine_rows(Var a, Var b);
// Per-row unit normalization of x[R,D]. Rows with norm below 1e-12 become the
// fixed unit vector (1,...,1)/sqrt(D) and pass no gradient.
Var normalize_rows(Var x);

}  // namespace repa::diffcore
