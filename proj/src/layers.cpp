#include "smat/layers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smat::nn {

namespace {

Tensor xavier(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
}

} // namespace

void init_linear(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng) {
    ps.add(name + ".w", xavier(in, out, in, out, rng));
    ps.add(name + ".b", Tensor({out}, 0.0));
}

void init_conv(ParameterSet& ps, const std::string& name, int kernel, int cin, int cout, Rng& rng) {
    const int k2 = kernel * kernel;
    ps.add(name + ".w", xavier(k2 * cin, cout, k2 * cin, k2 * cout, rng));
    ps.add(name + ".b", Tensor({cout}, 0.0));
}

void init_depthwise(ParameterSet& ps, const std::string& name, int kernel, int channels, Rng& rng) {
    const int k2 = kernel * kernel;
    ps.add(name + ".w", xavier(k2, channels, k2, k2, rng));
    ps.add(name + ".b", Tensor({channels}, 0.0));
}

void init_norm(ParameterSet& ps, const std::string& name, int channels) {
    ps.add(name + ".gamma", Tensor({channels}, 1.0));
    ps.add(name + ".beta", Tensor({channels}, 0.0));
}

Var linear(Graph& g, ParameterSet& ps, const std::string& name, Var x) {
    return ag::linear(x, g.parameter(ps, name + ".w"), g.parameter(ps, name + ".b"));
}

Var norm(Graph& g, ParameterSet& ps, const std::string& name, Var x) {
    return ag::layer_norm(x, g.parameter(ps, name + ".gamma"), g.parameter(ps, name + ".beta"), 1e-5);
}

FeatureMap conv(Graph& g, ParameterSet& ps, const std::string& name, const FeatureMap& in, int kernel,
                int stride, int pad) {
    Var y = ag::conv2d(in.tokens, in.height, in.width, g.parameter(ps, name + ".w"), g.parameter(ps, name + ".b"),
                       kernel, stride, pad);
    FeatureMap out;
    out.tokens = y;
    out.height = (in.height + 2 * pad - kernel) / stride + 1;
    out.width = (in.width + 2 * pad - kernel) / stride + 1;
    out.stride = in.stride * stride;
    out.frame = in.frame.downsampled(stride);
    return out;
}

Var attention(Var q, Var k, Var v) {
    if (q.cols() != k.cols())
        throw std::invalid_argument("attention: query width " + std::to_string(q.cols()) + " != key width " +
                                    std::to_string(k.cols()));
    if (k.rows() != v.rows())
        throw std::invalid_argument("attention: key rows " + std::to_string(k.rows()) + " != value rows " +
                                    std::to_string(v.rows()));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(k.cols()));
    Var scores = ag::scale(ag::matmul(q, ag::transpose(k)), inv_sqrt_d);
    return ag::matmul(ag::softmax_rows(scores), v);
}

void init_mha(ParameterSet& ps, const std::string& name, int q_in, int kv_in, int width, Rng& rng) {
    init_linear(ps, name + ".wq", q_in, width, rng);
    init_linear(ps, name + ".wk", kv_in, width, rng);
    init_linear(ps, name + ".wv", kv_in, width, rng);
    init_linear(ps, name + ".wo", width, width, rng);
}

Var mha(Graph& g, ParameterSet& ps, const std::string& name, Var q_in, Var k_in, Var v_in, int heads) {
    Var q = linear(g, ps, name + ".wq", q_in);
    Var k = linear(g, ps, name + ".wk", k_in);
    Var v = linear(g, ps, name + ".wv", v_in);
    const int width = q.cols();
    if (heads <= 0 || width % heads != 0)
        throw std::invalid_argument("mha: width " + std::to_string(width) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    if (heads == 1) return linear(g, ps, name + ".wo", attention(q, k, v));
    const int d = width / heads;
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h)
        outs.push_back(attention(ag::slice_cols(q, h * d, d), ag::slice_cols(k, h * d, d), ag::slice_cols(v, h * d, d)));
    return linear(g, ps, name + ".wo", ag::concat_cols(outs));
}

void init_ffn(ParameterSet& ps, const std::string& name, int width, int hidden, Rng& rng) {
    init_linear(ps, name + ".fc1", width, hidden, rng);
    init_linear(ps, name + ".fc2", hidden, width, rng);
}

Var ffn(Graph& g, ParameterSet& ps, const std::string& name, Var x) {
    return linear(g, ps, name + ".fc2", ag::relu(linear(g, ps, name + ".fc1", x)));
}

void init_attention_block(ParameterSet& ps, const std::string& name, int width, int ffn_hidden, Rng& rng) {
    init_mha(ps, name + ".attn", width, width, width, rng);
    init_norm(ps, name + ".norm1", width);
    init_ffn(ps, name + ".ffn", width, ffn_hidden, rng);
    init_norm(ps, name + ".norm2", width);
}

Var attention_block(Graph& g, ParameterSet& ps, const std::string& name, Var query, Var memory, Var query_pos,
                    Var memory_pos, int heads) {
    Var q_in = query_pos.valid() ? ag::add(query, query_pos) : query;
    Var k_in = memory_pos.valid() ? ag::add(memory, memory_pos) : memory;
    Var x = norm(g, ps, name + ".norm1", ag::add(query, mha(g, ps, name + ".attn", q_in, k_in, memory, heads)));
    return norm(g, ps, name + ".norm2", ag::add(x, ffn(g, ps, name + ".ffn", x)));
}

Tensor positional_encoding(const FeatureMap& map, int width) {
    if (width % 4 != 0) throw std::invalid_argument("positional_encoding: width must be a multiple of 4");
    const int bands = width / 4;
    // Wavelengths spaced geometrically from 0.2 m to 20 m.
    constexpr double min_wavelength = 0.2, max_wavelength = 20.0;
    std::vector<double> omega(static_cast<std::size_t>(bands));
    for (int j = 0; j < bands; ++j) {
        const double t = bands > 1 ? static_cast<double>(j) / (bands - 1) : 0.0;
        omega[static_cast<std::size_t>(j)] =
            2.0 * std::numbers::pi / (min_wavelength * std::pow(max_wavelength / min_wavelength, t));
    }
    Tensor pe = Tensor::matrix(map.cells(), width);
    for (int iy = 0; iy < map.height; ++iy)
        for (int ix = 0; ix < map.width; ++ix) {
            const double x = map.frame.center_x(ix), y = map.frame.center_y(iy);
            const int r = iy * map.width + ix;
            for (int j = 0; j < bands; ++j) {
                const double w = omega[static_cast<std::size_t>(j)];
                pe.at(r, 4 * j) = std::sin(w * x);
                pe.at(r, 4 * j + 1) = std::cos(w * x);
                pe.at(r, 4 * j + 2) = std::sin(w * y);
                pe.at(r, 4 * j + 3) = std::cos(w * y);
            }
        }
    return pe;
}

} // namespace smat::nn
