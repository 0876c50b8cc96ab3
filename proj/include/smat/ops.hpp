#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "smat/autograd.hpp"

// Differentiable primitives. Matrices are (rows x cols); spatial maps are
// token matrices of shape (H*W x C) with row index y*W + x.
namespace smat::ag {

// Linear algebra.
Var matmul(Var a, Var b);
/// x * w + b, with w (in x out) and b holding `out` values.
Var linear(Var x, Var w, Var b);
Var transpose(Var a);

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Adds a row vector (1 x C or C) to every row.
Var add_row(Var a, Var row);
/// Multiplies every row r of `a` by the scalar s[r] (s is N x 1).
Var mul_col(Var a, Var s);
Var relu(Var a);
Var gelu(Var a);
Var sin(Var a);
Var cos(Var a);
Var abs(Var a);
/// log(1 + exp(a)), computed stably.
Var softplus(Var a);
/// 1 / (1 + a) for a > -1.
Var reciprocal_one_plus(Var a);
Var sigmoid(Var a);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// Row-wise max / min -> (N x 1).
Var row_max(Var a);
Var row_min(Var a);

// Normalization.
Var softmax_rows(Var a);
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
/// Each row divided by sqrt(|row|^2 + eps).
Var l2_normalize_rows(Var a, double eps = 1e-12);

// Structure.
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int count);
Var gather_rows(Var a, const std::vector<int>& rows);

// Spatial (token-major maps).
/// Dense 2D convolution. w is (k*k*Cin x Cout) with row index (ky*k + kx)*Cin + c.
Var conv2d(Var x, int height, int width, Var w, Var b, int kernel, int stride, int pad);
/// Per-channel k x k convolution, stride 1, "same" padding. w is (k*k x C).
Var depthwise_conv2d(Var x, int height, int width, Var w, Var b, int kernel);
Var upsample_nearest(Var x, int height, int width, int factor);
Var avg_pool(Var x, int height, int width, int window);
/// Channel-wise cross-correlation of the template map over the search map
/// with zero padding, normalized by the template area. Output has the
/// search map's shape.
Var depthwise_xcorr(Var search, int sh, int sw, Var templ, int th, int tw);

/// Pairwise sqrt(|a_i - b_j|^2 + eps) -> (Na x Nb).
Var pairwise_distance(Var a, Var b, double eps = 1e-12);

/// Max over the rows that share a cell: out[cell[r]] = max_r x[r]. Cells no
/// row maps to stay zero.
Var scatter_max(Var x, const std::vector<int>& cell, int num_cells);

/// Observer invoked with every softmax output computed on this thread.
/// Used by tests to audit row sums across whole forward passes.
using SoftmaxObserver = std::function<void(const Tensor&)>;
void set_softmax_observer(SoftmaxObserver observer);

/// Observer invoked by every op with a non-differentiable point (relu, abs,
/// row_max, row_min, scatter_max) with a digest of the branch each element
/// took. Two evaluations with equal digest sequences lie on the same smooth
/// piece, which is what finite-difference checks need.
using BranchObserver = std::function<void(std::uint64_t)>;
void set_branch_observer(BranchObserver observer);

} // namespace smat::ag
