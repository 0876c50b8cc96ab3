#include "smat/backbone.hpp"

#include <stdexcept>

namespace smat::backbone {

namespace {

std::string stage_name(const std::string& name, int s) { return name + ".stage" + std::to_string(s); }
std::string block_name(const std::string& name, int s, int b) {
    return stage_name(name, s) + ".block" + std::to_string(b);
}

nn::Var maybe_norm(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, nn::Var x, bool on) {
    return on ? nn::norm(g, ps, name, x) : x;
}

// Largest window <= ratio dividing both dims.
int pool_window(int ratio, int h, int w) {
    int r = std::min({ratio, h, w});
    while (r > 1 && (h % r != 0 || w % r != 0)) --r;
    return std::max(r, 1);
}

BackboneConfig make(std::string name, int in_channels, std::array<int, 4> channels, std::array<int, 4> depths,
                    std::array<int, 4> heads, std::array<int, 4> ffn) {
    BackboneConfig cfg;
    cfg.name = std::move(name);
    cfg.in_channels = in_channels;
    const std::array<int, 4> sr{8, 4, 2, 1};
    for (std::size_t s = 0; s < 4; ++s) {
        StageConfig& st = cfg.stages[s];
        st.channels = channels[s];
        st.depth = depths[s];
        st.heads = heads[s];
        st.ffn_expansion = ffn[s];
        st.sr_ratio = sr[s];
        st.patch_kernel = s == 0 ? 7 : 3;
        st.patch_stride = s == 0 ? 4 : 2;
    }
    return cfg;
}

} // namespace

void BackboneConfig::validate() const {
    int stride = 1;
    const std::array<int, 4> expected{4, 8, 16, 32};
    for (std::size_t s = 0; s < 4; ++s) {
        const StageConfig& st = stages[s];
        if (st.channels <= 0 || st.depth < 0 || st.heads <= 0 || st.ffn_expansion <= 0 || st.sr_ratio <= 0)
            throw std::invalid_argument("BackboneConfig: non-positive stage setting");
        if (st.channels % st.heads != 0)
            throw std::invalid_argument("BackboneConfig: stage channels not divisible by heads");
        stride *= st.patch_stride;
        if (stride != expected[s]) throw std::invalid_argument("BackboneConfig: cumulative strides must be 4/8/16/32");
    }
    if (in_channels <= 0) throw std::invalid_argument("BackboneConfig: in_channels must be positive");
}

BackboneConfig desk_small(int in_channels) {
    return make("desk-small", in_channels, {16, 32, 64, 128}, {1, 1, 1, 1}, {1, 2, 4, 8}, {4, 4, 4, 4});
}

BackboneConfig pvtv2_b2(int in_channels) {
    return make("pvtv2-b2", in_channels, {64, 128, 320, 512}, {3, 4, 6, 3}, {1, 2, 5, 8}, {8, 8, 4, 8});
}

BackboneConfig preset(const std::string& name, int in_channels) {
    if (name == "desk-small") return desk_small(in_channels);
    if (name == "pvtv2-b2") return pvtv2_b2(in_channels);
    throw std::invalid_argument("unknown backbone preset: " + name);
}

void init_backbone(nn::ParameterSet& ps, const std::string& name, const BackboneConfig& cfg, Rng& rng) {
    cfg.validate();
    int cin = cfg.in_channels;
    for (int s = 0; s < 4; ++s) {
        const StageConfig& st = cfg.stages[static_cast<std::size_t>(s)];
        const std::string sn = stage_name(name, s);
        const int c = st.channels;
        nn::init_conv(ps, sn + ".patch", st.patch_kernel, cin, c, rng);
        nn::init_norm(ps, sn + ".patch_norm", c);
        for (int b = 0; b < st.depth; ++b) {
            const std::string bn = block_name(name, s, b);
            nn::init_norm(ps, bn + ".norm1", c);
            nn::init_mha(ps, bn + ".attn", c, c, c, rng);
            if (st.sr_ratio > 1) {
                nn::init_linear(ps, bn + ".sr", c, c, rng);
                nn::init_norm(ps, bn + ".sr_norm", c);
            }
            nn::init_norm(ps, bn + ".norm2", c);
            const int hidden = c * st.ffn_expansion;
            nn::init_linear(ps, bn + ".fc1", c, hidden, rng);
            nn::init_depthwise(ps, bn + ".dwconv", 3, hidden, rng);
            nn::init_linear(ps, bn + ".fc2", hidden, c, rng);
        }
        nn::init_norm(ps, sn + ".norm", c);
        cin = c;
    }
}

MultiScaleFeatures extract(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& bev,
                           const BackboneConfig& cfg) {
    cfg.validate();
    if (bev.height % 32 != 0 || bev.width % 32 != 0 || bev.height == 0 || bev.width == 0)
        throw std::invalid_argument("backbone: BEV dims " + std::to_string(bev.height) + "x" +
                                    std::to_string(bev.width) + " are not divisible by 32");
    if (bev.channels() != cfg.in_channels)
        throw std::invalid_argument("backbone: input channels do not match config");

    MultiScaleFeatures out;
    nn::FeatureMap x = bev;
    for (int s = 0; s < 4; ++s) {
        const StageConfig& st = cfg.stages[static_cast<std::size_t>(s)];
        const std::string sn = stage_name(name, s);
        x = nn::conv(g, ps, sn + ".patch", x, st.patch_kernel, st.patch_stride, st.patch_kernel / 2);
        x.tokens = maybe_norm(g, ps, sn + ".patch_norm", x.tokens, cfg.normalize);
        for (int b = 0; b < st.depth; ++b) {
            const std::string bn = block_name(name, s, b);
            nn::Var h = maybe_norm(g, ps, bn + ".norm1", x.tokens, cfg.normalize);
            nn::Var kv = h;
            if (st.sr_ratio > 1) {
                const int r = pool_window(st.sr_ratio, x.height, x.width);
                kv = nn::linear(g, ps, bn + ".sr", ag::avg_pool(h, x.height, x.width, r));
                kv = maybe_norm(g, ps, bn + ".sr_norm", kv, cfg.normalize);
            }
            x.tokens = ag::add(x.tokens, nn::mha(g, ps, bn + ".attn", h, kv, kv, st.heads));

            nn::Var f = maybe_norm(g, ps, bn + ".norm2", x.tokens, cfg.normalize);
            f = nn::linear(g, ps, bn + ".fc1", f);
            f = ag::depthwise_conv2d(f, x.height, x.width, g.parameter(ps, bn + ".dwconv.w"),
                                     g.parameter(ps, bn + ".dwconv.b"), 3);
            f = nn::linear(g, ps, bn + ".fc2", ag::gelu(f));
            x.tokens = ag::add(x.tokens, f);
        }
        x.tokens = maybe_norm(g, ps, sn + ".norm", x.tokens, cfg.normalize);
        out.levels[static_cast<std::size_t>(s)] = x;
    }
    return out;
}

} // namespace smat::backbone
