#include "smat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smat {

double normalize_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double t = theta - two_pi * std::floor((theta + std::numbers::pi) / two_pi);
    // Rounding can land exactly on +pi.
    if (t >= std::numbers::pi) t -= two_pi;
    if (t < -std::numbers::pi) t = -std::numbers::pi;
    return t;
}

Box3D::Box3D(Vec3 center, BoxSize size, double yaw) : center_(center), size_(size), yaw_(normalize_angle(yaw)) {
    if (!(size.w > 0.0 && size.l > 0.0 && size.h > 0.0))
        throw std::invalid_argument("Box3D: sizes must be positive");
    if (!std::isfinite(center.x) || !std::isfinite(center.y) || !std::isfinite(center.z) || !std::isfinite(yaw))
        throw std::invalid_argument("Box3D: non-finite pose");
}

Box3D Box3D::enlarged(double margin) const {
    return Box3D(center_, BoxSize{size_.w + 2 * margin, size_.l + 2 * margin, size_.h + 2 * margin}, yaw_);
}

Vec3 Box3D::to_local(const Vec3& p) const {
    const double c = std::cos(yaw_), s = std::sin(yaw_);
    const double dx = p.x - center_.x, dy = p.y - center_.y;
    return {c * dx + s * dy, -s * dx + c * dy, p.z - center_.z};
}

Vec3 Box3D::to_world(const Vec3& q) const {
    const double c = std::cos(yaw_), s = std::sin(yaw_);
    return {center_.x + c * q.x - s * q.y, center_.y + s * q.x + c * q.y, center_.z + q.z};
}

bool Box3D::contains(const Vec3& p, double tolerance) const {
    const Vec3 q = to_local(p);
    return std::fabs(q.x) <= size_.l / 2 + tolerance && std::fabs(q.y) <= size_.w / 2 + tolerance &&
           std::fabs(q.z) <= size_.h / 2 + tolerance;
}

std::array<double, 7> Box3D::to_array() const {
    return {center_.x, center_.y, center_.z, size_.w, size_.l, size_.h, yaw_};
}

Box3D Box3D::from_array(std::span<const double> v) {
    if (v.size() != 7) throw std::invalid_argument("Box3D::from_array needs 7 values");
    return Box3D(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
    const double hl = box.size().l / 2, hw = box.size().w / 2;
    const double c = std::cos(box.yaw()), s = std::sin(box.yaw());
    const std::array<Vec2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
    std::array<Vec2, 4> out{};
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = {box.center().x + c * local[i].x - s * local[i].y, box.center().y + s * local[i].x + c * local[i].y};
    return out;
}

double polygon_area(std::span<const Vec2> poly) {
    if (poly.size() < 3) return 0.0;
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

namespace {

double side(const Vec2& a, const Vec2& b, const Vec2& p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
    const double sp = side(a, b, p), sq = side(a, b, q);
    const double t = sp / (sp - sq);
    return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

} // namespace

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
    std::vector<Vec2> out(subject.begin(), subject.end());
    for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2& b = clip[(e + 1) % clip.size()];
        std::vector<Vec2> in;
        in.swap(out);
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Vec2& cur = in[i];
            const Vec2& prev = in[(i + in.size() - 1) % in.size()];
            const bool cur_in = side(a, b, cur) >= 0.0;
            const bool prev_in = side(a, b, prev) >= 0.0;
            if (cur_in) {
                if (!prev_in) out.push_back(segment_line_intersection(prev, cur, a, b));
                out.push_back(cur);
            } else if (prev_in) {
                out.push_back(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    return out;
}

double iou3d(const Box3D& a_in, const Box3D& b_in) {
    const auto aa = a_in.to_array(), ba = b_in.to_array();
    if (aa == ba) return 1.0;
    // Fixed argument order keeps the result bitwise symmetric.
    const bool swap = ba < aa;
    const Box3D& a = swap ? b_in : a_in;
    const Box3D& b = swap ? a_in : b_in;

    const double za0 = a.center().z - a.size().h / 2, za1 = a.center().z + a.size().h / 2;
    const double zb0 = b.center().z - b.size().h / 2, zb1 = b.center().z + b.size().h / 2;
    const double overlap_h = std::min(za1, zb1) - std::max(za0, zb0);
    if (overlap_h <= 0.0) return 0.0;

    const auto ca = bev_corners(a), cb = bev_corners(b);
    const auto poly = clip_convex(ca, cb);
    if (poly.size() < 3) return 0.0;
    const double area = polygon_area(poly);
    if (area <= 0.0) return 0.0;

    const double inter = area * overlap_h;
    const double uni = a.volume() + b.volume() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const Box3D& a, const Box3D& b) {
    const double dx = a.center().x - b.center().x;
    const double dy = a.center().y - b.center().y;
    const double dz = a.center().z - b.center().z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double success_auc(std::span<const double> ious) {
    if (ious.empty()) throw std::invalid_argument("success_auc: empty list");
    long long hits = 0;
    for (int j = 0; j < kAucThresholds; ++j) {
        const double t = static_cast<double>(j) / (kAucThresholds - 1);
        for (double v : ious)
            if (v > t) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / (static_cast<double>(kAucThresholds) * static_cast<double>(ious.size()));
}

double precision_auc(std::span<const double> distances) {
    if (distances.empty()) throw std::invalid_argument("precision_auc: empty list");
    long long hits = 0;
    for (int j = 0; j < kAucThresholds; ++j) {
        const double t = kPrecisionMaxDistance * static_cast<double>(j) / (kAucThresholds - 1);
        for (double d : distances)
            if (d < t) ++hits;
    }
    return 100.0 * static_cast<double>(hits) /
           (static_cast<double>(kAucThresholds) * static_cast<double>(distances.size()));
}

TrackScore score_track(std::span<const Box3D> predicted, std::span<const Box3D> ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw std::invalid_argument("score_track: prediction and ground-truth lengths differ");
    TrackScore s;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        s.ious.push_back(iou3d(predicted[i], ground_truth[i]));
        s.distances.push_back(center_distance(predicted[i], ground_truth[i]));
    }
    s.success = success_auc(s.ious);
    s.precision = precision_auc(s.distances);
    return s;
}

} // namespace smat
