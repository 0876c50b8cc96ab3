#pragma once

#include <string>

#include "smat/autograd.hpp"
#include "smat/ops.hpp"
#include "smat/random.hpp"

namespace smat::nn {

using ag::Graph;
using ag::ParameterSet;
using ag::Var;

/// Metric placement of a BEV grid: cell (ix, iy) is centered at
/// (x0 + (ix + 0.5) * cell, y0 + (iy + 0.5) * cell).
struct GridFrame {
    double x0 = 0.0;
    double y0 = 0.0;
    double cell = 1.0;

    double center_x(int ix) const { return x0 + (ix + 0.5) * cell; }
    double center_y(int iy) const { return y0 + (iy + 0.5) * cell; }
    GridFrame downsampled(int factor) const { return {x0, y0, cell * factor}; }
};

/// Spatial feature map stored token-major: tokens is (height*width x C).
struct FeatureMap {
    Var tokens;
    int height = 0;
    int width = 0;
    /// Downsampling relative to the pillar grid.
    int stride = 1;
    GridFrame frame;

    int channels() const { return tokens.cols(); }
    int cells() const { return height * width; }
};

// Parameter initialization (Xavier-uniform weights, zero biases).
void init_linear(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng);
void init_conv(ParameterSet& ps, const std::string& name, int kernel, int cin, int cout, Rng& rng);
void init_depthwise(ParameterSet& ps, const std::string& name, int kernel, int channels, Rng& rng);
void init_norm(ParameterSet& ps, const std::string& name, int channels);

Var linear(Graph& g, ParameterSet& ps, const std::string& name, Var x);
Var norm(Graph& g, ParameterSet& ps, const std::string& name, Var x);
FeatureMap conv(Graph& g, ParameterSet& ps, const std::string& name, const FeatureMap& in, int kernel,
                int stride, int pad);

/// Softmax(Q K^T / sqrt(d)) V with d the key width.
Var attention(Var q, Var k, Var v);

/// Projections for multi-head attention: .wq/.wk/.wv/.wo (+ biases).
void init_mha(ParameterSet& ps, const std::string& name, int q_in, int kv_in, int width, Rng& rng);
/// Concat(head_1..head_h) W_o where head_j attends with the j-th column
/// block of the projected Q, K, V.
Var mha(Graph& g, ParameterSet& ps, const std::string& name, Var q_in, Var k_in, Var v_in, int heads);

/// Two affine maps with a rectifier between: .fc1, .fc2.
void init_ffn(ParameterSet& ps, const std::string& name, int width, int hidden, Rng& rng);
Var ffn(Graph& g, ParameterSet& ps, const std::string& name, Var x);

/// Post-norm transformer block:
///   x = LN(q + MHA(q + pos_q, m + pos_m, m)); out = LN(x + FFN(x)).
/// Position vars may be invalid (no encoding).
void init_attention_block(ParameterSet& ps, const std::string& name, int width, int ffn_hidden, Rng& rng);
Var attention_block(Graph& g, ParameterSet& ps, const std::string& name, Var query, Var memory, Var query_pos,
                    Var memory_pos, int heads);

/// Fixed 2D sinusoidal encoding of each cell's metric center,
/// (cells x width); width must be a multiple of 4.
Tensor positional_encoding(const FeatureMap& map, int width);

} // namespace smat::nn
