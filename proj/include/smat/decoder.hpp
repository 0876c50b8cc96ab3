#pragma once

#include <string>
#include <vector>

#include "smat/geometry.hpp"
#include "smat/layers.hpp"

namespace smat::decoder {

/// Box state regressed per prediction: x, y, z, sin(yaw), cos(yaw).
inline constexpr int kBoxDims = 5;
/// Frequency bands per coordinate in the proposal embedding.
inline constexpr int kProjBands = 8;
/// sin and cos of every band of x, y, z.
inline constexpr int kProjDims = 3 * kProjBands * 2;

struct DecoderConfig {
    int k = 64;
    bool two_stage = true;
    int heads = 8;
    int depth = 1;
    int width = 64;
    int ffn_hidden = 128;
};

struct StageOneOutput {
    /// (N x 1) score logits, one per location.
    nn::Var logits;
    /// (N x 5) raw regressions: x, y as offsets from the cell center.
    nn::Var raw;
    /// (N x 5) boxes with x, y made absolute.
    nn::Var boxes;
};

struct Selection {
    std::vector<int> indices;
    /// b-hat (k x 5) and U-hat (k x width).
    nn::Var boxes;
    nn::Var features;
};

struct PredictionSet {
    /// (k x 1) and (k x 5).
    nn::Var logits;
    nn::Var boxes;

    int size() const { return logits.rows(); }
};

void init_decoder(nn::ParameterSet& ps, const std::string& name, const DecoderConfig& cfg, Rng& rng);

/// Two parallel affine heads over every location of the fused map.
StageOneOutput stage_one(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& fused);

/// Indices of the k largest scores, highest first; ties go to the smaller
/// index. Throws when k exceeds the number of scores or is not positive.
std::vector<int> topk_indices(const Tensor& scores, int k);

Selection select_topk(const StageOneOutput& s1, const nn::FeatureMap& fused, int k);
/// Same gather with externally fixed indices.
Selection select_indices(const StageOneOutput& s1, const nn::FeatureMap& fused, const std::vector<int>& indices);

/// Frequencies of the proposal embedding (radians per meter).
double band_frequency(int band);
/// [sin(w_j c) ..., cos(w_j c) ...] over c in (x, y, z) and every band.
nn::Var proposal_embedding(nn::Var boxes);

/// Linear(Concat(U-hat, Proj(b-hat))) -> (k x width).
nn::Var make_queries(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const Selection& sel);

/// Queries attend over `memory`; heads give scores and boxes. When `anchor`
/// is valid the box head's x, y, z are residuals added to it.
PredictionSet decode(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, nn::Var queries, nn::Var memory,
                     nn::Var anchor, const DecoderConfig& cfg);

/// Learned queries for the one-stage variant (k x width).
nn::Var learned_queries(nn::Graph& g, nn::ParameterSet& ps, const std::string& name);

/// Highest-scoring prediction as a box of the known size.
Box3D pick_best(const Tensor& logits, const Tensor& boxes, const BoxSize& size);
Box3D pick_best(const PredictionSet& ps, const BoxSize& size);

} // namespace smat::decoder
