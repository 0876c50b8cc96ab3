#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "smat/backbone.hpp"

using namespace smat;
using smat::testing::random_tensor;

namespace {

nn::FeatureMap bev(ag::Graph& g, const Tensor& t, int h, int w) {
    nn::FeatureMap m;
    m.tokens = g.constant(t);
    m.height = h;
    m.width = w;
    m.frame = {-1.6, -1.6, 0.1};
    return m;
}

} // namespace

TEST(BackboneConfig, Presets) {
    const auto desk = backbone::preset("desk-small", 16);
    const auto full = backbone::preset("pvtv2-b2", 16);
    EXPECT_EQ(desk.stages[3].channels, 128);
    EXPECT_EQ(desk.stages[2].heads, 4);
    EXPECT_EQ(full.stages[2].channels, 320);
    EXPECT_EQ(full.stages[2].depth, 6);
    EXPECT_EQ(full.stages[2].heads, 5);
    EXPECT_EQ(full.stages[0].ffn_expansion, 8);
    EXPECT_NO_THROW(desk.validate());
    EXPECT_NO_THROW(full.validate());
    EXPECT_THROW(backbone::preset("resnet", 16), std::invalid_argument);
}

TEST(BackboneConfig, RejectsBadStrides) {
    auto cfg = backbone::desk_small(8);
    cfg.stages[1].patch_stride = 4;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = backbone::desk_small(8);
    cfg.stages[2].heads = 3;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Backbone, StrideContract) {
    Rng rng(1);
    const auto cfg = backbone::desk_small(4);
    ag::ParameterSet ps;
    backbone::init_backbone(ps, "bb", cfg, rng);
    for (auto [h, w] : {std::pair{32, 32}, std::pair{64, 32}, std::pair{64, 64}}) {
        ag::Graph g(false);
        const auto f = backbone::extract(g, ps, "bb", bev(g, random_tensor({h * w, 4}, rng), h, w), cfg);
        const int strides[4] = {4, 8, 16, 32};
        for (int i = 2; i <= 5; ++i) {
            EXPECT_EQ(f.c(i).height, h / strides[i - 2]);
            EXPECT_EQ(f.c(i).width, w / strides[i - 2]);
            EXPECT_EQ(f.c(i).channels(), cfg.stages[static_cast<std::size_t>(i - 2)].channels);
            EXPECT_EQ(f.c(i).stride, strides[i - 2]);
        }
    }
}

TEST(Backbone, RejectsIndivisibleInput) {
    Rng rng(2);
    const auto cfg = backbone::desk_small(4);
    ag::ParameterSet ps;
    backbone::init_backbone(ps, "bb", cfg, rng);
    ag::Graph g(false);
    EXPECT_THROW(backbone::extract(g, ps, "bb", bev(g, random_tensor({48 * 32, 4}, rng), 48, 32), cfg),
                 std::invalid_argument);
    EXPECT_THROW(backbone::extract(g, ps, "bb", bev(g, random_tensor({32 * 32, 3}, rng), 32, 32), cfg),
                 std::invalid_argument);
}

TEST(Backbone, SharedWeightsAcrossBranches) {
    Rng rng(3);
    const auto cfg = backbone::desk_small(4);
    ag::ParameterSet ps;
    backbone::init_backbone(ps, "bb", cfg, rng);
    const ag::ParameterSet before = ps;
    const Tensor x = random_tensor({32 * 32, 4}, rng);
    ag::Graph g(false);
    const auto a = backbone::extract(g, ps, "bb", bev(g, x, 32, 32), cfg);
    const auto b = backbone::extract(g, ps, "bb", bev(g, random_tensor({32 * 32, 4}, rng), 32, 32), cfg);
    const auto c = backbone::extract(g, ps, "bb", bev(g, x, 32, 32), cfg);
    EXPECT_TRUE(ps.same_values(before));
    for (int i = 2; i <= 5; ++i) {
        const Tensor &ta = a.c(i).tokens.value(), &tc = c.c(i).tokens.value();
        for (std::size_t k = 0; k < ta.size(); ++k) ASSERT_EQ(ta[k], tc[k]);
    }
    EXPECT_NE(a.c(2).tokens.value()[0], b.c(2).tokens.value()[0]);
}

TEST(Backbone, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    const auto cfg = backbone::desk_small(4);
    ag::ParameterSet ps;
    backbone::init_backbone(ps, "bb", cfg, rng);
    for (auto& [n, e] : ps.entries())
        for (double& v : e.value.values()) v += 0.05 * rng.normal();
    const Tensor x = random_tensor({32 * 32, 4}, rng);
    Rng wr(5);
    std::array<Tensor, 4> probes;
    for (std::size_t s = 0; s < 4; ++s) {
        const int side = 32 >> (s + 2);
        probes[s] = random_tensor({side * side, cfg.stages[s].channels}, wr);
    }
    const auto res = smat::testing::check_parameters(
        ps, [&](ag::Graph& g, ag::ParameterSet& p) {
            const auto f = backbone::extract(g, p, "bb", bev(g, x, 32, 32), cfg);
            ag::Var total = ag::sum(ag::mul(f.levels[0].tokens, g.constant(probes[0])));
            for (std::size_t s = 1; s < 4; ++s)
                total = ag::add(total, ag::sum(ag::mul(f.levels[s].tokens, g.constant(probes[s]))));
            return total;
        },
        2, rng);
    EXPECT_LT(res.max_rel_error, 1e-3) << res.worst;
    EXPECT_GT(res.checked, 100);
}
