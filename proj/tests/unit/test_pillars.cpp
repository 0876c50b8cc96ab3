#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>

#include "gradcheck.hpp"
#include "smat/pillars.hpp"

using namespace smat;
using namespace smat::pillars;

namespace {

PointCloud random_cloud(Rng& rng, int n, const Area3& a, double spill = 0.5) {
    PointCloud pc;
    for (int i = 0; i < n; ++i)
        pc.points.push_back({rng.uniform(a.x_min - spill, a.x_max + spill), rng.uniform(a.y_min - spill, a.y_max + spill),
                             rng.uniform(a.z_min - spill, a.z_max + spill), rng.uniform()});
    return pc;
}

PillarConfig small_config() {
    PillarConfig c;
    c.area = {-0.8, -0.8, -1.0, 0.8, 0.8, 1.0};
    c.dx = c.dy = 0.1;
    c.dz = 2.0;
    c.max_points_per_pillar = 8;
    c.max_pillars = 256;
    return c;
}

using Key = std::tuple<double, double, double>;

} // namespace

TEST(PillarConfig, CarPresetIs64By64) {
    const PillarConfig c = car_search_preset();
    EXPECT_EQ(c.grid_h(), 64);
    EXPECT_EQ(c.grid_w(), 64);
    EXPECT_NO_THROW(c.validate());
}

TEST(PillarConfig, RejectsFractionalGridAndShortPillars) {
    PillarConfig c;
    c.dx = 0.15;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = PillarConfig{};
    c.dz = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = PillarConfig{};
    c.area.x_max = c.area.x_min;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Pillarize, EmptyCloudGivesZeroMap) {
    const PillarConfig c = small_config();
    const PillarTensor pt = pillarize({}, c, 1);
    EXPECT_EQ(pt.num_pillars, 0);
    ag::ParameterSet ps;
    Rng rng(1);
    init_pillar_net(ps, "pfn", 4, rng);
    ag::Graph g;
    const nn::FeatureMap m = pillar_feature_net(g, ps, "pfn", pt, c);
    EXPECT_EQ(m.height, 16);
    EXPECT_EQ(m.width, 16);
    for (double v : m.tokens.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Pillarize, PartitionsInAreaPoints) {
    PillarConfig c = small_config();
    c.max_points_per_pillar = 100000;
    c.max_pillars = 100000;
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const PointCloud pc = random_cloud(rng, 300, c.area);
        const PillarTensor pt = pillarize(pc, c, trial);
        std::vector<Key> expected, got;
        for (const Point& p : pc.points)
            if (c.area.contains(p.x, p.y, p.z)) expected.emplace_back(p.x, p.y, p.z);
        std::vector<int> seen(static_cast<std::size_t>(c.grid_h() * c.grid_w()), 0);
        for (int p = 0; p < pt.num_pillars; ++p) {
            const auto [iy, ix] = pt.coords[static_cast<std::size_t>(p)];
            ASSERT_EQ(seen[static_cast<std::size_t>(iy * pt.grid_w + ix)]++, 0) << "cell used twice";
            for (int j = 0; j < pt.max_points; ++j) {
                if (!pt.mask[static_cast<std::size_t>(p) * pt.max_points + j]) continue;
                const double* f = pt.features.data() + (static_cast<std::size_t>(p) * pt.max_points + j) * kDecoratedDims;
                EXPECT_GE(f[0], c.area.x_min + ix * c.dx - 1e-12);
                EXPECT_LE(f[0], c.area.x_min + (ix + 1) * c.dx + 1e-12);
                EXPECT_GE(f[1], c.area.y_min + iy * c.dy - 1e-12);
                EXPECT_LE(f[1], c.area.y_min + (iy + 1) * c.dy + 1e-12);
                got.emplace_back(f[0], f[1], f[2]);
            }
        }
        std::sort(expected.begin(), expected.end());
        std::sort(got.begin(), got.end());
        EXPECT_EQ(expected, got);
    }
}

TEST(Pillarize, BoundaryPointsAreHalfOpen) {
    const PillarConfig c = small_config();
    PointCloud pc;
    pc.points.push_back({c.area.x_max, 0.0, 0.0, 1.0});
    pc.points.push_back({c.area.x_min, 0.0, 0.0, 1.0});
    pc.points.push_back({0.0, 0.0, c.area.z_max, 1.0});
    const PillarTensor pt = pillarize(pc, c, 0);
    EXPECT_EQ(pt.point_count(), 1);
    EXPECT_EQ(pt.coords[0][1], 0);
}

TEST(Pillarize, CapsAreRespectedAndUnmaskedRowsAreZero) {
    PillarConfig c = small_config();
    c.max_points_per_pillar = 3;
    c.max_pillars = 10;
    Rng rng(3);
    const PointCloud pc = random_cloud(rng, 2000, c.area, 0.0);
    const PillarTensor pt = pillarize(pc, c, 5);
    EXPECT_EQ(pt.num_pillars, 10);
    for (int p = 0; p < pt.num_pillars; ++p) {
        EXPECT_LE(pt.points_in(p), 3);
        for (int j = 0; j < pt.max_points; ++j) {
            if (pt.mask[static_cast<std::size_t>(p) * pt.max_points + j]) continue;
            const double* f = pt.features.data() + (static_cast<std::size_t>(p) * pt.max_points + j) * kDecoratedDims;
            for (int d = 0; d < kDecoratedDims; ++d) EXPECT_EQ(f[d], 0.0);
        }
    }
}

TEST(Pillarize, SeededOverflowIsDeterministic) {
    PillarConfig c = small_config();
    c.max_points_per_pillar = 2;
    c.max_pillars = 20;
    Rng rng(4);
    const PointCloud pc = random_cloud(rng, 1500, c.area, 0.0);
    const PillarTensor a = pillarize(pc, c, 9), b = pillarize(pc, c, 9), d = pillarize(pc, c, 10);
    EXPECT_EQ(a.features.values().size(), b.features.values().size());
    EXPECT_TRUE(std::equal(a.features.values().begin(), a.features.values().end(), b.features.values().begin()));
    EXPECT_EQ(a.coords, b.coords);
    EXPECT_NE(a.coords, d.coords);
}

TEST(Pillarize, DecorationOfSinglePoint) {
    const PillarConfig c = small_config();
    PointCloud pc;
    pc.points.push_back({0.13, -0.27, 0.4, 0.7});
    const PillarTensor pt = pillarize(pc, c, 0);
    ASSERT_EQ(pt.num_pillars, 1);
    EXPECT_EQ(pt.coords[0][0], 5);
    EXPECT_EQ(pt.coords[0][1], 9);
    const double* f = pt.features.data();
    const double expected[kDecoratedDims] = {0.13, -0.27, 0.4, 0.7, 0, 0, 0, 0.13 - 0.15, -0.27 + 0.25, 0.4};
    for (int d = 0; d < kDecoratedDims; ++d) EXPECT_NEAR(f[d], expected[d], 1e-12) << d;
}

TEST(PillarFeatureNet, HandTracedIdentityMap) {
    const PillarConfig c = small_config();
    PointCloud pc;
    pc.points.push_back({0.13, -0.27, 0.4, 0.7});
    const PillarTensor pt = pillarize(pc, c, 0);
    ag::ParameterSet ps;
    Rng rng(5);
    init_pillar_net(ps, "pfn", 3, rng);
    Tensor& w = ps.value("pfn.point.w");
    w.fill(0.0);
    w.at(0, 0) = 1.0;  // x
    w.at(1, 1) = 1.0;  // y (negative: rectified away)
    w.at(3, 2) = 2.0;  // intensity
    ps.value("pfn.point.b")[2] = -0.5;
    ag::Graph g;
    const Tensor out = pillar_feature_net(g, ps, "pfn", pt, c).tokens.value();
    const int cell = 5 * 16 + 9;
    EXPECT_NEAR(out.at(cell, 0), 0.13, 1e-15);
    EXPECT_EQ(out.at(cell, 1), 0.0);
    EXPECT_NEAR(out.at(cell, 2), 0.9, 1e-15);
    double total = 0;
    for (double v : out.values()) total += std::fabs(v);
    EXPECT_NEAR(total, 0.13 + 0.9, 1e-12);
}

TEST(PillarFeatureNet, InvariantToPointOrder) {
    const PillarConfig c = small_config();
    Rng rng(6);
    PointCloud pc = random_cloud(rng, 400, c.area, 0.0);
    ag::ParameterSet ps;
    init_pillar_net(ps, "pfn", 6, rng);
    ag::Graph g;
    const Tensor a = pillar_feature_net(g, ps, "pfn", pillarize(pc, c, 0), c).tokens.value();
    std::reverse(pc.points.begin(), pc.points.end());
    for (std::size_t i = 1; i < pc.points.size(); ++i) std::swap(pc.points[i], pc.points[rng.below(i + 1)]);
    const Tensor b = pillar_feature_net(g, ps, "pfn", pillarize(pc, c, 0), c).tokens.value();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(PillarFeatureNet, GradientMatchesFiniteDifferences) {
    const PillarConfig c = small_config();
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const PillarTensor pt = pillarize(random_cloud(rng, 60, c.area, 0.0), c, trial);
        ag::ParameterSet ps;
        init_pillar_net(ps, "pfn", 4, rng);
        for (double& v : ps.value("pfn.point.b").values()) v = 0.1 * rng.normal();
        Rng probe_rng(trial);
        const Tensor weights = smat::testing::random_tensor({c.grid_h() * c.grid_w(), 4}, probe_rng);
        const auto res = smat::testing::check_parameters(
            ps, [&](ag::Graph& g, ag::ParameterSet& p) {
                return ag::sum(ag::mul(pillar_feature_net(g, p, "pfn", pt, c).tokens, g.constant(weights)));
            },
            20, rng);
        EXPECT_LT(res.max_rel_error, 1e-3) << res.worst;
    }
}

TEST(CropPoints, KeepsOrderAndHalfOpen) {
    PointCloud pc;
    pc.points = {{0, 0, 0, 0}, {1, 0, 0, 0}, {0.5, 0.5, 0.5, 0}};
    const PointCloud out = crop_points(pc, Area3{0, 0, 0, 1, 1, 1});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out.points[1].x, 0.5);
}
