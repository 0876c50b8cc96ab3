#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "smat/geometry.hpp"

using namespace smat;

namespace {

Box3D random_box(Rng& rng, double spread = 1.0) {
    return Box3D(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-0.5, 0.5),
                 rng.uniform(0.5, 2.5), rng.uniform(0.5, 4.0), rng.uniform(0.5, 2.0),
                 rng.uniform(-std::numbers::pi, std::numbers::pi));
}

} // namespace

TEST(Box3D, RejectsNonPositiveSizes) {
    EXPECT_THROW(Box3D(0, 0, 0, 0.0, 1, 1, 0), std::invalid_argument);
    EXPECT_THROW(Box3D(0, 0, 0, 1, -1, 1, 0), std::invalid_argument);
    EXPECT_THROW(Box3D(0, 0, 0, 1, 1, 1, NAN), std::invalid_argument);
}

TEST(Box3D, YawIsNormalized) {
    EXPECT_DOUBLE_EQ(Box3D(0, 0, 0, 1, 1, 1, 3 * std::numbers::pi / 2).yaw(), -std::numbers::pi / 2);
    EXPECT_DOUBLE_EQ(Box3D(0, 0, 0, 1, 1, 1, std::numbers::pi).yaw(), -std::numbers::pi);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double y = normalize_angle(rng.uniform(-50, 50));
        EXPECT_GE(y, -std::numbers::pi);
        EXPECT_LT(y, std::numbers::pi);
    }
}

TEST(Box3D, LocalWorldRoundTrip) {
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const Box3D b = random_box(rng, 10);
        const Vec3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const Vec3 q = b.to_world(b.to_local(p));
        EXPECT_NEAR(q.x, p.x, 1e-12);
        EXPECT_NEAR(q.y, p.y, 1e-12);
        EXPECT_NEAR(q.z, p.z, 1e-12);
    }
}

TEST(Box3D, ArrayRoundTrip) {
    const Box3D b(1, 2, 3, 1.5, 4, 1.6, 0.3);
    EXPECT_EQ(Box3D::from_array(b.to_array()), b);
    EXPECT_THROW(Box3D::from_array(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(BevCorners, ShoelaceAreaEqualsFootprint) {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Box3D b = random_box(rng, 20);
        const auto c = bev_corners(b);
        const double area = polygon_area(c);
        EXPECT_NEAR(area, b.size().w * b.size().l, 1e-9 * b.size().w * b.size().l);
    }
}

TEST(BevCorners, AxisAlignedLayout) {
    const auto c = bev_corners(Box3D(0, 0, 0, 2, 4, 1, 0));
    EXPECT_DOUBLE_EQ(c[0].x, 2);
    EXPECT_DOUBLE_EQ(c[0].y, -1);
    EXPECT_DOUBLE_EQ(c[2].x, -2);
    EXPECT_DOUBLE_EQ(c[2].y, 1);
}

TEST(Iou3d, IdenticalIsExactlyOne) {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const Box3D b = random_box(rng, 5);
        EXPECT_EQ(iou3d(b, b), 1.0);
    }
}

TEST(Iou3d, DisjointIsExactlyZero) {
    const Box3D a(0, 0, 0, 1, 1, 1, 0.4);
    EXPECT_EQ(iou3d(a, Box3D(5, 0, 0, 1, 1, 1, 0.1)), 0.0);
    EXPECT_EQ(iou3d(a, Box3D(0, 0, 3, 1, 1, 1, 0.4)), 0.0);
}

TEST(Iou3d, Symmetric) {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const Box3D a = random_box(rng), b = random_box(rng);
        EXPECT_EQ(iou3d(a, b), iou3d(b, a));
    }
}

TEST(Iou3d, HalfShiftedCube) {
    // Overlap 0.5, union 1.5.
    EXPECT_NEAR(iou3d(Box3D(0, 0, 0, 1, 1, 1, 0), Box3D(0.5, 0, 0, 1, 1, 1, 0)), 1.0 / 3.0, 1e-12);
}

TEST(Iou3d, RotatedSquareInscribed) {
    // Square rotated 45 degrees inside itself: overlap is the regular octagon.
    const double s = 1.0;
    const double octagon = 2 * (std::sqrt(2.0) - 1) * s * s;
    const double expected = octagon / (2 * s * s - octagon);
    EXPECT_NEAR(iou3d(Box3D(0, 0, 0, s, s, 1, 0), Box3D(0, 0, 0, s, s, 1, std::numbers::pi / 4)), expected, 1e-12);
}

TEST(Iou3d, MatchesMonteCarlo) {
    Rng rng(6), mc(7);
    for (int i = 0; i < 10; ++i) {
        const Box3D a = random_box(rng), b = random_box(rng);
        EXPECT_NEAR(iou3d(a, b), oracle::monte_carlo_iou(a, b, 400000, mc), 0.01) << i;
    }
}

TEST(Auc, CeilingValues) {
    const std::vector<double> ones(5, 1.0), zeros(5, 0.0);
    EXPECT_DOUBLE_EQ(success_auc(ones), 100.0 * 20 / 21);
    EXPECT_DOUBLE_EQ(precision_auc(zeros), 100.0 * 20 / 21);
    EXPECT_EQ(success_auc(zeros), 0.0);
    EXPECT_EQ(precision_auc(std::vector<double>(3, 10.0)), 0.0);
}

TEST(Auc, EmptyListThrows) {
    EXPECT_THROW(success_auc({}), std::invalid_argument);
    EXPECT_THROW(precision_auc({}), std::invalid_argument);
}

TEST(Auc, EqualsDoubleLoop) {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> ious(1 + rng.below(30)), dists(1 + rng.below(30));
        for (double& v : ious) v = rng.below(4) == 0 ? std::round(rng.uniform() * 20) / 20 : rng.uniform();
        for (double& v : dists) v = rng.below(4) == 0 ? std::round(rng.uniform(0, 3) * 10) / 10 : rng.uniform(0, 3);
        EXPECT_EQ(success_auc(ious), oracle::success_loop(ious));
        EXPECT_EQ(precision_auc(dists), oracle::precision_loop(dists));
    }
}

TEST(ScoreTrack, PerfectAndDriftingTracks) {
    std::vector<Box3D> gt, drift;
    for (int t = 0; t < 10; ++t) {
        gt.emplace_back(t * 0.5, 0, 0, 1.6, 3.9, 1.5, 0);
        drift.emplace_back(t * 0.5 + 10 + t, 0, 0, 1.6, 3.9, 1.5, 0);
    }
    const TrackScore perfect = score_track(gt, gt);
    EXPECT_DOUBLE_EQ(perfect.success, 100.0 * 20 / 21);
    EXPECT_DOUBLE_EQ(perfect.precision, 100.0 * 20 / 21);
    const TrackScore lost = score_track(drift, gt);
    EXPECT_EQ(lost.success, 0.0);
    EXPECT_EQ(lost.precision, 0.0);
    EXPECT_EQ(lost.ious.size(), 10u);
    EXPECT_THROW(score_track(std::span(gt).first(3), gt), std::invalid_argument);
}
