#pragma once

#include <array>
#include <span>
#include <vector>

namespace smat {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct BoxSize {
    double w = 1.0, l = 1.0, h = 1.0;
};

/// Wraps an angle into [-pi, pi).
double normalize_angle(double theta);

/// Oriented 3D box (x, y, z, w, l, h, yaw). At yaw 0 the length l runs
/// along +x and the width w along +y; yaw rotates about +z. The yaw is
/// normalized to [-pi, pi) on construction and sizes must be positive.
class Box3D {
public:
    Box3D() = default;
    Box3D(Vec3 center, BoxSize size, double yaw);
    Box3D(double x, double y, double z, double w, double l, double h, double yaw)
        : Box3D(Vec3{x, y, z}, BoxSize{w, l, h}, yaw) {}

    const Vec3& center() const { return center_; }
    const BoxSize& size() const { return size_; }
    double yaw() const { return yaw_; }
    double volume() const { return size_.w * size_.l * size_.h; }

    Box3D with_center(Vec3 c) const { return Box3D(c, size_, yaw_); }
    Box3D with_yaw(double yaw) const { return Box3D(center_, size_, yaw); }
    /// Same pose, each side grown by `margin` meters.
    Box3D enlarged(double margin) const;

    /// Point-in-box test with a tolerance added to every half extent.
    bool contains(const Vec3& p, double tolerance = 0.0) const;
    /// World point expressed in the box frame (origin at center, x along heading).
    Vec3 to_local(const Vec3& p) const;
    Vec3 to_world(const Vec3& local) const;

    /// 7-tuple (x, y, z, w, l, h, yaw).
    std::array<double, 7> to_array() const;
    static Box3D from_array(std::span<const double> v);

    friend bool operator==(const Box3D& a, const Box3D& b) { return a.to_array() == b.to_array(); }

private:
    Vec3 center_{};
    BoxSize size_{};
    double yaw_ = 0.0;
};

/// BEV footprint corners, counter-clockwise, starting at the (+l/2, -w/2)
/// corner in the box frame.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// Signed shoelace area (positive for counter-clockwise order).
double polygon_area(std::span<const Vec2> poly);

/// Clips `subject` by the convex counter-clockwise polygon `clip`
/// (Sutherland-Hodgman).
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// BEV intersection area times vertical overlap, divided by the union
/// volume. Symmetric; identical boxes give exactly 1.
double iou3d(const Box3D& a, const Box3D& b);

double center_distance(const Box3D& a, const Box3D& b);

/// One-pass-evaluation scores (percentages) plus the per-frame inputs.
struct TrackScore {
    double success = 0.0;
    double precision = 0.0;
    std::vector<double> ious;
    std::vector<double> distances;
};

/// Number of uniformly spaced thresholds used by both AUCs.
inline constexpr int kAucThresholds = 21;
/// Upper end of the center-distance threshold range, meters.
inline constexpr double kPrecisionMaxDistance = 2.0;

/// Mean over thresholds t in {0, 0.05, ..., 1} of the fraction of IoUs
/// strictly above t, times 100. Throws on an empty list.
double success_auc(std::span<const double> ious);
/// Mean over thresholds t in {0, 0.1, ..., 2} m of the fraction of
/// distances strictly below t, times 100. Throws on an empty list.
double precision_auc(std::span<const double> distances);

TrackScore score_track(std::span<const Box3D> predicted, std::span<const Box3D> ground_truth);

} // namespace smat
