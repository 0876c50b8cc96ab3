#pragma once

#include <array>
#include <string>

#include "smat/layers.hpp"

namespace smat::backbone {

struct StageConfig {
    int channels = 16;
    int depth = 1;
    int heads = 1;
    int ffn_expansion = 4;
    /// Keys/values are average-pooled by this factor (capped by the map size).
    int sr_ratio = 1;
    int patch_kernel = 3;
    int patch_stride = 2;
};

/// Four-stage pyramid with overlapping patch embedding, spatial-reduction
/// attention and a depthwise-convolutional FFN. Cumulative strides are
/// 4, 8, 16, 32.
struct BackboneConfig {
    std::string name = "desk-small";
    int in_channels = 16;
    std::array<StageConfig, 4> stages{};
    /// Layer norms on/off (off only for analytic tests).
    bool normalize = true;

    void validate() const;
};

BackboneConfig desk_small(int in_channels);
BackboneConfig pvtv2_b2(int in_channels);
/// "desk-small" or "pvtv2-b2".
BackboneConfig preset(const std::string& name, int in_channels);

/// Backbone outputs C_2..C_5 at strides 4, 8, 16, 32.
struct MultiScaleFeatures {
    std::array<nn::FeatureMap, 4> levels;

    /// Level by pyramid index i in {2, 3, 4, 5}.
    const nn::FeatureMap& c(int i) const { return levels.at(static_cast<std::size_t>(i - 2)); }
};

void init_backbone(nn::ParameterSet& ps, const std::string& name, const BackboneConfig& cfg, Rng& rng);

/// Throws std::invalid_argument unless the BEV height and width are
/// divisible by 32.
MultiScaleFeatures extract(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& bev,
                           const BackboneConfig& cfg);

} // namespace smat::backbone
