#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "smat/layers.hpp"
#include "smat/ops.hpp"

using namespace smat;
using smat::testing::check_input;
using smat::testing::random_tensor;

namespace {

// Weighted sum so every output element carries a distinct gradient.
ag::Var probe(ag::Graph& g, ag::Var y, std::uint64_t seed = 99) {
    Rng rng(seed);
    return ag::sum(ag::mul(y, g.constant(random_tensor(y.value().shape(), rng))));
}

void expect_near(const Tensor& a, const Tensor& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

} // namespace

TEST(Tensor, ShapeAndAccess) {
    Tensor t({2, 3, 4}, 1.5);
    EXPECT_EQ(t.rows(), 2);
    EXPECT_EQ(t.cols(), 12);
    EXPECT_EQ(t.size(), 24u);
    t.at(1, 5) = 7.0;
    EXPECT_EQ(t[17], 7.0);
    EXPECT_THROW(t.reshaped({5, 5}), std::invalid_argument);
    EXPECT_EQ(t.reshaped({4, 6}).shape_string(), "[4,6]");
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
    Rng c(1);
    for (int i = 0; i < 1000; ++i) {
        const auto v = c.below(7);
        ASSERT_LT(v, 7u);
    }
}

TEST(Attention, SingleKeyReturnsValueRow) {
    Rng rng(1);
    ag::Graph g;
    ag::Var q = g.constant(random_tensor({3, 4}, rng));
    ag::Var k = g.constant(random_tensor({1, 4}, rng));
    ag::Var v = g.constant(random_tensor({1, 5}, rng));
    const Tensor out = nn::attention(q, k, v).value();
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 5; ++c) EXPECT_NEAR(out.at(i, c), v.value().at(0, c), 1e-15);
}

TEST(Attention, IdenticalKeysAverageValues) {
    Rng rng(2);
    Tensor k = Tensor::matrix(4, 3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) k.at(r, c) = 0.3 * (c + 1);
    ag::Graph g;
    const Tensor v = random_tensor({4, 2}, rng);
    const Tensor out = nn::attention(g.constant(random_tensor({2, 3}, rng)), g.constant(k), g.constant(v)).value();
    for (int c = 0; c < 2; ++c) {
        const double mean = (v.at(0, c) + v.at(1, c) + v.at(2, c) + v.at(3, c)) / 4;
        EXPECT_NEAR(out.at(0, c), mean, 1e-14);
        EXPECT_NEAR(out.at(1, c), mean, 1e-14);
    }
}

TEST(Attention, MatchesLoopOracle) {
    Rng rng(3);
    ag::Graph g;
    const Tensor q = random_tensor({3, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 3}, rng);
    expect_near(nn::attention(g.constant(q), g.constant(k), g.constant(v)).value(), oracle::attention(q, k, v), 1e-12);
}

TEST(Attention, DimensionMismatchThrows) {
    Rng rng(4);
    ag::Graph g;
    EXPECT_THROW(nn::attention(g.constant(random_tensor({2, 3}, rng)), g.constant(random_tensor({2, 4}, rng)),
                               g.constant(random_tensor({2, 4}, rng))),
                 std::invalid_argument);
    EXPECT_THROW(nn::attention(g.constant(random_tensor({2, 4}, rng)), g.constant(random_tensor({3, 4}, rng)),
                               g.constant(random_tensor({2, 4}, rng))),
                 std::invalid_argument);
}

TEST(Mha, TwoHeadsWithBlockIdentityAreIndependentAttentions) {
    Rng rng(5);
    ag::ParameterSet ps;
    nn::init_mha(ps, "m", 4, 4, 4, rng);
    for (const char* p : {"m.wq.w", "m.wk.w", "m.wv.w", "m.wo.w"}) {
        Tensor& w = ps.value(p);
        w.fill(0.0);
        for (int i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    }
    const Tensor q = random_tensor({3, 4}, rng), kv = random_tensor({5, 4}, rng);
    ag::Graph g;
    const Tensor out = nn::mha(g, ps, "m", g.constant(q), g.constant(kv), g.constant(kv), 2).value();
    auto cols = [](const Tensor& t, int start) {
        Tensor s = Tensor::matrix(t.rows(), 2);
        for (int r = 0; r < t.rows(); ++r)
            for (int c = 0; c < 2; ++c) s.at(r, c) = t.at(r, start + c);
        return s;
    };
    const Tensor h0 = oracle::attention(cols(q, 0), cols(kv, 0), cols(kv, 0));
    const Tensor h1 = oracle::attention(cols(q, 2), cols(kv, 2), cols(kv, 2));
    for (int r = 0; r < 3; ++r) {
        EXPECT_NEAR(out.at(r, 0), h0.at(r, 0), 1e-12);
        EXPECT_NEAR(out.at(r, 1), h0.at(r, 1), 1e-12);
        EXPECT_NEAR(out.at(r, 2), h1.at(r, 0), 1e-12);
        EXPECT_NEAR(out.at(r, 3), h1.at(r, 1), 1e-12);
    }
}

TEST(Mha, MatchesLoopOracleWithRandomWeights) {
    Rng rng(15);
    for (int heads : {1, 2, 4}) {
        ag::ParameterSet ps;
        nn::init_mha(ps, "m", 3, 5, 8, rng);
        for (auto& [n, e] : ps.entries())
            for (double& v : e.value.values()) v = rng.normal();
        const Tensor q = random_tensor({4, 3}, rng), k = random_tensor({6, 5}, rng), v = random_tensor({6, 5}, rng);
        ag::Graph g;
        expect_near(nn::mha(g, ps, "m", g.constant(q), g.constant(k), g.constant(v), heads).value(),
                    oracle::mha(ps, "m", q, k, v, heads), 1e-12);
    }
}

TEST(Mha, WidthNotDivisibleByHeadsThrows) {
    Rng rng(6);
    ag::ParameterSet ps;
    nn::init_mha(ps, "m", 6, 6, 6, rng);
    ag::Graph g;
    ag::Var x = g.constant(random_tensor({2, 6}, rng));
    EXPECT_THROW(nn::mha(g, ps, "m", x, x, x, 4), std::invalid_argument);
}

TEST(Mha, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    ag::ParameterSet ps;
    nn::init_mha(ps, "m", 4, 6, 8, rng);
    for (auto& [n, e] : ps.entries())
        for (double& v : e.value.values()) v += 0.1 * rng.normal();
    const Tensor q = random_tensor({3, 4}, rng), kv = random_tensor({5, 6}, rng);
    const auto res = smat::testing::check_parameters(
        ps, [&](ag::Graph& g, ag::ParameterSet& p) {
            return probe(g, nn::mha(g, p, "m", g.constant(q), g.constant(kv), g.constant(kv), 2));
        },
        6, rng);
    EXPECT_LT(res.max_rel_error, 1e-3) << res.worst;
}

TEST(Ffn, ZeroWeightsGiveZero) {
    Rng rng(8);
    ag::ParameterSet ps;
    nn::init_ffn(ps, "f", 3, 5, rng);
    for (auto& [n, e] : ps.entries()) e.value.fill(0.0);
    ag::Graph g;
    for (double v : nn::ffn(g, ps, "f", g.constant(random_tensor({4, 3}, rng))).value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Ffn, NegativePreActivationLeavesSecondBias) {
    Rng rng(9);
    ag::ParameterSet ps;
    nn::init_ffn(ps, "f", 3, 5, rng);
    ps.value("f.fc1.w").fill(0.0);
    ps.value("f.fc1.b").fill(-1.0);
    for (int c = 0; c < 3; ++c) ps.value("f.fc2.b")[static_cast<std::size_t>(c)] = 0.5 * c - 0.2;
    ag::Graph g;
    const Tensor out = nn::ffn(g, ps, "f", g.constant(random_tensor({4, 3}, rng))).value();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.at(r, c), 0.5 * c - 0.2);
}

TEST(Ffn, MatchesLoopOracle) {
    Rng rng(10);
    ag::ParameterSet ps;
    nn::init_ffn(ps, "f", 3, 5, rng);
    for (auto& [n, e] : ps.entries())
        for (double& v : e.value.values()) v = rng.normal();
    const Tensor x = random_tensor({4, 3}, rng);
    ag::Graph g;
    const Tensor out = nn::ffn(g, ps, "f", g.constant(x)).value();
    const Tensor &w1 = ps.value("f.fc1.w"), &b1 = ps.value("f.fc1.b"), &w2 = ps.value("f.fc2.w"),
                 &b2 = ps.value("f.fc2.b");
    for (int r = 0; r < 4; ++r)
        for (int o = 0; o < 3; ++o) {
            double acc = b2[static_cast<std::size_t>(o)];
            for (int h = 0; h < 5; ++h) {
                double pre = b1[static_cast<std::size_t>(h)];
                for (int i = 0; i < 3; ++i) pre += x.at(r, i) * w1.at(i, h);
                acc += std::max(0.0, pre) * w2.at(h, o);
            }
            EXPECT_NEAR(out.at(r, o), acc, 1e-12);
        }
}

TEST(Softmax, RowsSumToOneAndObserverSeesThem) {
    Rng rng(11);
    int seen = 0;
    ag::set_softmax_observer([&](const Tensor& t) {
        ++seen;
        for (int r = 0; r < t.rows(); ++r) {
            double s = 0;
            for (int c = 0; c < t.cols(); ++c) s += t.at(r, c);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    });
    ag::Graph g;
    ag::softmax_rows(g.constant(random_tensor({5, 7}, rng, 30.0)));
    ag::set_softmax_observer({});
    EXPECT_EQ(seen, 1);
}

TEST(BranchObserver, DigestTracksKinkSides) {
    std::vector<std::uint64_t> digests;
    ag::set_branch_observer([&](std::uint64_t d) { digests.push_back(d); });
    ag::Graph g;
    auto run = [&](double x) {
        ag::relu(g.constant(Tensor({1, 2}, std::vector<double>{x, 1.0})));
        return digests.back();
    };
    const std::uint64_t above = run(1e-6), above2 = run(0.5), below = run(-1e-6);
    ag::softmax_rows(g.constant(Tensor({1, 2}, 0.0)));
    ag::set_branch_observer({});
    EXPECT_EQ(above, above2);
    EXPECT_NE(above, below);
    EXPECT_EQ(digests.size(), 3u);
}

TEST(GradCheck, RedrawsCoordinatesStraddlingAKink) {
    ag::ParameterSet ps;
    ps.add("w", Tensor({1, 4}, std::vector<double>{3e-6, -0.5, 0.7, -2e-6}));
    Rng rng(3);
    const auto res = smat::testing::check_parameters(
        ps, [](ag::Graph& g, ag::ParameterSet& p) { return ag::sum(ag::relu(g.parameter(p, "w"))); }, 40, rng);
    EXPECT_GT(res.kinked, 0);
    EXPECT_EQ(res.checked, 40);
    EXPECT_LT(res.max_rel_error, 1e-9);
}

struct OpCase {
    const char* name;
    std::vector<int> shape;
    std::function<ag::Var(ag::Graph&, ag::Var)> op;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
    const OpCase& c = GetParam();
    Rng rng(12);
    Tensor x = random_tensor(c.shape, rng);
    const auto res = check_input(x, [&](ag::Graph& g, ag::Var v) { return probe(g, c.op(g, v)); });
    EXPECT_LT(res.max_rel_error, 1e-3) << c.name << " " << res.worst;
}

namespace {

ag::Var other(ag::Graph& g, std::vector<int> shape, std::uint64_t seed) {
    Rng rng(seed);
    return g.constant(random_tensor(std::move(shape), rng));
}

} // namespace

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"matmul", {3, 4}, [](ag::Graph& g, ag::Var x) { return ag::matmul(x, other(g, {4, 2}, 1)); }},
        OpCase{"matmul_rhs", {4, 2}, [](ag::Graph& g, ag::Var x) { return ag::matmul(other(g, {3, 4}, 1), x); }},
        OpCase{"transpose", {3, 4}, [](ag::Graph&, ag::Var x) { return ag::transpose(x); }},
        OpCase{"gelu", {3, 4}, [](ag::Graph&, ag::Var x) { return ag::gelu(x); }},
        OpCase{"sin_cos", {3, 4}, [](ag::Graph&, ag::Var x) { return ag::add(ag::sin(x), ag::cos(x)); }},
        OpCase{"softplus", {3, 4}, [](ag::Graph&, ag::Var x) { return ag::softplus(x); }},
        OpCase{"sigmoid", {3, 4}, [](ag::Graph&, ag::Var x) { return ag::sigmoid(x); }},
        OpCase{"mul_col", {3, 1}, [](ag::Graph& g, ag::Var x) { return ag::mul_col(other(g, {3, 4}, 2), x); }},
        OpCase{"add_row", {1, 4}, [](ag::Graph& g, ag::Var x) { return ag::add_row(other(g, {3, 4}, 2), x); }},
        OpCase{"softmax", {3, 5}, [](ag::Graph&, ag::Var x) { return ag::softmax_rows(x); }},
        OpCase{"row_max", {3, 5}, [](ag::Graph&, ag::Var x) { return ag::row_max(x); }},
        OpCase{"row_min", {3, 5}, [](ag::Graph&, ag::Var x) { return ag::row_min(x); }},
        OpCase{"mean", {3, 5}, [](ag::Graph&, ag::Var x) { return ag::mean(x); }},
        OpCase{"layer_norm", {3, 5},
               [](ag::Graph& g, ag::Var x) { return ag::layer_norm(x, other(g, {5}, 3), other(g, {5}, 4)); }},
        OpCase{"l2_normalize", {3, 5}, [](ag::Graph&, ag::Var x) { return ag::l2_normalize_rows(x); }},
        OpCase{"concat_slice", {3, 5},
               [](ag::Graph& g, ag::Var x) { return ag::slice_cols(ag::concat_cols({other(g, {3, 2}, 5), x}), 1, 4); }},
        OpCase{"gather", {4, 3}, [](ag::Graph&, ag::Var x) { return ag::gather_rows(x, {3, 0, 3, 1}); }},
        OpCase{"conv2d", {16, 2},
               [](ag::Graph& g, ag::Var x) { return ag::conv2d(x, 4, 4, other(g, {18, 3}, 6), other(g, {3}, 7), 3, 2, 1); }},
        OpCase{"depthwise", {16, 2},
               [](ag::Graph& g, ag::Var x) { return ag::depthwise_conv2d(x, 4, 4, other(g, {9, 2}, 8), other(g, {2}, 9), 3); }},
        OpCase{"upsample", {4, 3}, [](ag::Graph&, ag::Var x) { return ag::upsample_nearest(x, 2, 2, 2); }},
        OpCase{"avg_pool", {16, 3}, [](ag::Graph&, ag::Var x) { return ag::avg_pool(x, 4, 4, 2); }},
        OpCase{"xcorr_search", {16, 2},
               [](ag::Graph& g, ag::Var x) { return ag::depthwise_xcorr(x, 4, 4, other(g, {4, 2}, 10), 2, 2); }},
        OpCase{"xcorr_template", {4, 2},
               [](ag::Graph& g, ag::Var x) { return ag::depthwise_xcorr(other(g, {16, 2}, 10), 4, 4, x, 2, 2); }},
        OpCase{"pairwise_distance", {3, 4},
               [](ag::Graph& g, ag::Var x) { return ag::pairwise_distance(x, other(g, {5, 4}, 11)); }},
        OpCase{"scatter_max", {5, 3},
               [](ag::Graph&, ag::Var x) { return ag::scatter_max(x, {2, 0, 2, 3, 0}, 6); }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Conv2d, MatchesLoopOracle) {
    Rng rng(13);
    const int h = 5, w = 4, cin = 2, cout = 3, k = 3, stride = 2, pad = 1;
    const Tensor x = random_tensor({h * w, cin}, rng), wt = random_tensor({k * k * cin, cout}, rng),
                 b = random_tensor({cout}, rng);
    ag::Graph g;
    const Tensor y = ag::conv2d(g.constant(x), h, w, g.constant(wt), g.constant(b), k, stride, pad).value();
    const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
    ASSERT_EQ(y.rows(), oh * ow);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int o = 0; o < cout; ++o) {
                double acc = b[static_cast<std::size_t>(o)];
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                        if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
                        for (int c = 0; c < cin; ++c) acc += x.at(iy * w + ix, c) * wt.at((ky * k + kx) * cin + c, o);
                    }
                EXPECT_NEAR(y.at(oy * ow + ox, o), acc, 1e-12);
            }
}

TEST(ScatterMax, EmptyCellsStayZeroAndMaxIsPermutationInvariant) {
    ag::Graph g;
    Tensor x({3, 2}, std::vector<double>{1, -2, 3, -4, 2, -1});
    const Tensor a = ag::scatter_max(g.constant(x), {1, 1, 1}, 3).value();
    Tensor xp({3, 2}, std::vector<double>{2, -1, 1, -2, 3, -4});
    const Tensor b = ag::scatter_max(g.constant(xp), {1, 1, 1}, 3).value();
    expect_near(a, b, 0.0);
    EXPECT_EQ(a.at(0, 0), 0.0);
    EXPECT_EQ(a.at(2, 1), 0.0);
    EXPECT_EQ(a.at(1, 0), 3.0);
    EXPECT_EQ(a.at(1, 1), -1.0);
}

TEST(Graph, ParameterGradientsAccumulateAcrossUses) {
    ag::ParameterSet ps;
    ps.add("p", Tensor({1, 1}, std::vector<double>{3.0}));
    ag::Graph g;
    ag::Var p = g.parameter(ps, "p");
    g.backward(ag::sum(ag::add(ag::mul(p, p), g.parameter(ps, "p"))));
    EXPECT_DOUBLE_EQ(ps.grad("p")[0], 7.0);
}
