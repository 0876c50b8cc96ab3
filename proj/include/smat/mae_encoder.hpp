#pragma once

#include <array>
#include <string>

#include "smat/backbone.hpp"
#include "smat/layers.hpp"

namespace smat::mae {

enum class Similarity { attention, cosine, euclidean, xcorr };
enum class Fusion { late, early, c2, c5 };

Similarity parse_similarity(const std::string& s);
Fusion parse_fusion(const std::string& s);
std::string to_string(Similarity s);
std::string to_string(Fusion f);

struct MaeConfig {
    /// Common channel width of every similarity feature.
    int width = 64;
    int heads = 8;
    /// Cross-attention blocks per scale.
    int depth = 1;
    int ffn_hidden = 128;
    bool positional = true;
    Similarity similarity = Similarity::attention;
    Fusion fusion = Fusion::late;
    /// Backbone channels of C_2..C_5.
    std::array<int, 4> in_channels{16, 32, 64, 128};
};

void init_mae(nn::ParameterSet& ps, const std::string& name, const MaeConfig& cfg, Rng& rng);

/// 1x1 projection of a backbone level to the encoder width. The same
/// parameters serve both branches.
nn::FeatureMap project(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& c);

/// Search pixels attend over template pixels: Q from the search feature,
/// K and V from the template feature. Output has the search map's shape.
nn::FeatureMap attention_similarity(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                    const nn::FeatureMap& search, const nn::FeatureMap& templ, const MaeConfig& cfg);

/// Raw similarity between projected features:
///   cosine    -> (Ns x 1) best cosine similarity over template pixels
///   euclidean -> (Ns x 1) smallest feature distance over template pixels
///   xcorr     -> (Ns x C) channel-wise cross-correlation response
nn::Var similarity_map(const nn::FeatureMap& search, const nn::FeatureMap& templ, Similarity kind);

/// Similarity map multiplied onto the search feature. Euclidean distances
/// d become weights 1 / (1 + d).
nn::FeatureMap alt_similarity(const nn::FeatureMap& search, const nn::FeatureMap& templ, Similarity kind);

/// Shared projection of both inputs followed by the configured similarity.
nn::FeatureMap cross_similarity(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                const nn::FeatureMap& c_search, const nn::FeatureMap& c_templ, const MaeConfig& cfg);

/// Top-down pass: P'_5 = P_5; P'_{i-1} = Conv3x3(Conv1x1(P_{i-1}) + Up2(P'_i)).
std::array<nn::FeatureMap, 4> fpn_propagate(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                            const std::array<nn::FeatureMap, 4>& p);

/// Upsample P'_3..P'_5 to P'_2, concatenate, 1x1 conv to width; no attention.
nn::FeatureMap concat_fuse(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                           const std::array<nn::FeatureMap, 4>& p);

/// concat_fuse followed by one self-attention block (Q = K = V = U).
nn::FeatureMap multiscale_merge(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                const std::array<nn::FeatureMap, 4>& p, const MaeConfig& cfg);

/// Full encoder: fused feature at C_2 resolution.
nn::FeatureMap encode(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                      const backbone::MultiScaleFeatures& search, const backbone::MultiScaleFeatures& templ,
                      const MaeConfig& cfg);

} // namespace smat::mae
