#include "smat/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace smat::decoder {

void init_decoder(nn::ParameterSet& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng) {
    if (cfg.k <= 0) throw std::invalid_argument("decoder: k must be positive");
    if (cfg.width % cfg.heads != 0) throw std::invalid_argument("decoder: width not divisible by heads");
    const int d = cfg.width;
    if (cfg.two_stage) {
        nn::init_linear(ps, name + ".s1_cls", d, 1, rng);
        nn::init_linear(ps, name + ".s1_box", d, kBoxDims, rng);
        nn::init_linear(ps, name + ".query", d + kProjDims, d, rng);
    } else {
        Tensor q = Tensor::matrix(cfg.k, d);
        for (double& v : q.values()) v = rng.normal(0.0, 1.0);
        ps.add(name + ".queries", std::move(q));
    }
    for (int b = 0; b < cfg.depth; ++b)
        nn::init_attention_block(ps, name + ".block" + std::to_string(b), d, cfg.ffn_hidden, rng);
    nn::init_linear(ps, name + ".cls", d, 1, rng);
    nn::init_linear(ps, name + ".box", d, kBoxDims, rng);
}

StageOneOutput stage_one(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& fused) {
    StageOneOutput out;
    out.logits = nn::linear(g, ps, name + ".s1_cls", fused.tokens);
    out.raw = nn::linear(g, ps, name + ".s1_box", fused.tokens);
    Tensor centers = Tensor::matrix(fused.cells(), kBoxDims);
    for (int iy = 0; iy < fused.height; ++iy)
        for (int ix = 0; ix < fused.width; ++ix) {
            const int r = iy * fused.width + ix;
            centers.at(r, 0) = fused.frame.center_x(ix);
            centers.at(r, 1) = fused.frame.center_y(iy);
        }
    out.boxes = ag::add(out.raw, g.constant(std::move(centers)));
    return out;
}

std::vector<int> topk_indices(const Tensor& scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (k <= 0 || k > n)
        throw std::invalid_argument("select_topk: k=" + std::to_string(k) + " with " + std::to_string(n) + " locations");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        const double sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
        return sa > sb || (sa == sb && a < b);
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Selection select_indices(const StageOneOutput& s1, const nn::FeatureMap& fused, const std::vector<int>& indices) {
    Selection sel;
    sel.indices = indices;
    sel.boxes = ag::gather_rows(s1.boxes, indices);
    sel.features = ag::gather_rows(fused.tokens, indices);
    return sel;
}

Selection select_topk(const StageOneOutput& s1, const nn::FeatureMap& fused, int k) {
    return select_indices(s1, fused, topk_indices(s1.logits.value(), k));
}

double band_frequency(int band) { return std::ldexp(std::numbers::pi / 6.4, band); }

nn::Var proposal_embedding(nn::Var boxes) {
    Tensor freq = Tensor::matrix(3, 3 * kProjBands);
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < kProjBands; ++j) freq.at(c, c * kProjBands + j) = band_frequency(j);
    nn::Var phase = ag::matmul(ag::slice_cols(boxes, 0, 3), boxes.graph()->constant(std::move(freq)));
    return ag::concat_cols({ag::sin(phase), ag::cos(phase)});
}

nn::Var make_queries(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const Selection& sel) {
    return nn::linear(g, ps, name + ".query", ag::concat_cols({sel.features, proposal_embedding(sel.boxes)}));
}

nn::Var learned_queries(nn::Graph& g, nn::ParameterSet& ps, const std::string& name) {
    return g.parameter(ps, name + ".queries");
}

PredictionSet decode(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, nn::Var queries, nn::Var memory,
                     nn::Var anchor, const DecoderConfig& cfg) {
    nn::Var t = queries;
    for (int b = 0; b < cfg.depth; ++b)
        t = nn::attention_block(g, ps, name + ".block" + std::to_string(b), t, memory, {}, {}, cfg.heads);
    PredictionSet out;
    out.logits = nn::linear(g, ps, name + ".cls", t);
    nn::Var raw = nn::linear(g, ps, name + ".box", t);
    if (anchor.valid())
        raw = ag::concat_cols({ag::add(ag::slice_cols(raw, 0, 3), ag::slice_cols(anchor, 0, 3)),
                               ag::slice_cols(raw, 3, 2)});
    out.boxes = raw;
    return out;
}

Box3D pick_best(const Tensor& logits, const Tensor& boxes, const BoxSize& size) {
    const int n = static_cast<int>(logits.size());
    if (n == 0) throw std::invalid_argument("pick_best: empty prediction set");
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
    const double yaw = std::atan2(boxes.at(best, 3), boxes.at(best, 4));
    return Box3D(Vec3{boxes.at(best, 0), boxes.at(best, 1), boxes.at(best, 2)}, size, yaw);
}

Box3D pick_best(const PredictionSet& ps, const BoxSize& size) {
    return pick_best(ps.logits.value(), ps.boxes.value(), size);
}

} // namespace smat::decoder
