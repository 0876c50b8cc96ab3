#include "smat/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smat::synth {

namespace {

struct Face {
    Vec3 center;
    Vec3 normal;
    Vec3 u, v;
    double half_u, half_v;
};

Face face(const Box3D& box, int index) {
    const double hl = box.size().l / 2, hw = box.size().w / 2, hh = box.size().h / 2;
    switch (index) {
    case 0: return {{hl, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hw, hh};
    case 1: return {{-hl, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hw, hh};
    case 2: return {{0, hw, 0}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}, hl, hh};
    case 3: return {{0, -hw, 0}, {0, -1, 0}, {1, 0, 0}, {0, 0, 1}, hl, hh};
    case 4: return {{0, 0, hh}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, hl, hw};
    default: return {{0, 0, -hh}, {0, 0, -1}, {1, 0, 0}, {0, 1, 0}, hl, hw};
    }
}

Vec3 rotate_yaw(const Vec3& p, double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

} // namespace

void ScenarioConfig::validate() const {
    if (n_frames < 2) throw std::invalid_argument("ScenarioConfig: need at least 2 frames");
    if (points_on_target < 0 || clutter_points < 0 || occluded_faces < 0)
        throw std::invalid_argument("ScenarioConfig: counts must be nonnegative");
    if (position_noise < 0 || yaw_noise < 0) throw std::invalid_argument("ScenarioConfig: noise std must be nonnegative");
    if (!(size.w > 0 && size.l > 0 && size.h > 0)) throw std::invalid_argument("ScenarioConfig: sizes must be positive");
    if (!(clutter_area.size_x() > 0 && clutter_area.size_y() > 0 && clutter_area.size_z() > 0))
        throw std::invalid_argument("ScenarioConfig: empty clutter area");
}

std::vector<int> visible_faces(const Box3D& box) {
    std::vector<int> out;
    for (int f = 0; f < 6; ++f) {
        const Face fc = face(box, f);
        const Vec3 n = rotate_yaw(fc.normal, box.yaw());
        const Vec3 c = box.to_world(fc.center);
        if (n.x * c.x + n.y * c.y + n.z * c.z < 0.0) out.push_back(f);
    }
    return out;
}

PointCloud sample_surface(const Box3D& box, const std::vector<int>& faces, int count, Rng& rng) {
    PointCloud out;
    if (faces.empty() || count <= 0) return out;
    std::vector<double> cumulative;
    double total = 0.0;
    for (int f : faces) {
        const Face fc = face(box, f);
        total += 4.0 * fc.half_u * fc.half_v;
        cumulative.push_back(total);
    }
    out.points.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double pick = rng.uniform(0.0, total);
        const std::size_t k = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        const Face fc = face(box, faces[std::min(k, faces.size() - 1)]);
        const double a = rng.uniform(-fc.half_u, fc.half_u);
        const double b = rng.uniform(-fc.half_v, fc.half_v);
        const Vec3 local{fc.center.x + a * fc.u.x + b * fc.v.x, fc.center.y + a * fc.u.y + b * fc.v.y,
                         fc.center.z + a * fc.u.z + b * fc.v.z};
        const Vec3 w = box.to_world(local);
        out.points.push_back({w.x, w.y, w.z, rng.uniform(0.3, 1.0)});
    }
    return out;
}

Sequence generate_sequence(const ScenarioConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Rng motion = rng.fork(1);
    Rng surface = rng.fork(2);
    Rng clutter = rng.fork(3);

    Vec3 c = cfg.initial_center;
    double yaw = cfg.initial_yaw;
    if (cfg.random_initial_pose) {
        yaw = motion.uniform(-cfg.yaw_spread, cfg.yaw_spread);
        c.x += motion.uniform(-cfg.center_spread, cfg.center_spread);
        c.y += motion.uniform(-cfg.center_spread, cfg.center_spread);
    }

    Sequence seq;
    seq.id = "synth-" + std::to_string(cfg.seed);
    seq.category = cfg.category;
    for (int t = 0; t < cfg.n_frames; ++t) {
        if (t > 0) {
            yaw += cfg.yaw_rate + cfg.yaw_noise * motion.normal();
            c.x += cfg.speed * std::cos(yaw) + cfg.position_noise * motion.normal();
            c.y += cfg.speed * std::sin(yaw) + cfg.position_noise * motion.normal();
        }
        const Box3D box(c, cfg.size, yaw);
        std::vector<int> faces = visible_faces(box);
        const int drop = std::min<int>(cfg.occluded_faces, static_cast<int>(faces.size()) - 1);
        for (int d = 0; d < drop; ++d)
            faces.erase(faces.begin() + static_cast<std::ptrdiff_t>(surface.below(faces.size())));

        Frame frame{sample_surface(box, faces, cfg.points_on_target, surface), box};
        const Area3& a = cfg.clutter_area;
        for (int i = 0; i < cfg.clutter_points;) {
            const Point p{c.x + clutter.uniform(a.x_min, a.x_max), c.y + clutter.uniform(a.y_min, a.y_max),
                          c.z + clutter.uniform(a.z_min, a.z_max), clutter.uniform(0.0, 1.0)};
            if (box.contains(p.position())) continue;
            frame.cloud.points.push_back(p);
            ++i;
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

std::vector<Sequence> generate_dataset(const ScenarioConfig& base, int count) {
    std::vector<Sequence> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        ScenarioConfig cfg = base;
        cfg.seed = base.seed * 1000003ULL + static_cast<std::uint64_t>(i);
        out.push_back(generate_sequence(cfg));
    }
    return out;
}

int first_frame_target_points(const Sequence& seq) {
    if (seq.frames.empty()) return 0;
    const Frame& f = seq.frames.front();
    int n = 0;
    for (const Point& p : f.cloud.points)
        if (f.gt.contains(p.position(), 1e-6)) ++n;
    return n;
}

std::vector<SweepRow> sparsity_sweep(tracker::Predictor& predictor, const ScenarioConfig& base,
                                     const std::vector<int>& counts, int per_bucket,
                                     const tracker::TrackerConfig& tcfg) {
    if (counts.empty()) throw std::invalid_argument("sparsity_sweep: no point counts");
    if (per_bucket < 1) throw std::invalid_argument("sparsity_sweep: need at least one sequence per bucket");
    if (!std::is_sorted(counts.begin(), counts.end()) ||
        std::adjacent_find(counts.begin(), counts.end()) != counts.end())
        throw std::invalid_argument("sparsity_sweep: counts must be strictly increasing");

    std::vector<SweepRow> rows(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b) rows[b].count = counts[b];
    for (std::size_t b = 0; b < counts.size(); ++b) {
        for (int i = 0; i < per_bucket; ++i) {
            ScenarioConfig cfg = base;
            cfg.points_on_target = counts[b];
            cfg.seed = base.seed * 1000003ULL + b * 100003ULL + static_cast<std::uint64_t>(i);
            const Sequence seq = generate_sequence(cfg);
            const int n = first_frame_target_points(seq);
            const auto it = std::lower_bound(counts.begin(), counts.end(), n);
            if (it == counts.end()) continue;
            SweepRow& row = rows[static_cast<std::size_t>(it - counts.begin())];
            const tracker::TrackResult r = tracker::track_sequence(seq, predictor, tcfg);
            ++row.sequences;
            row.success += r.score.success;
            row.precision += r.score.precision;
            row.sequence_success.push_back(r.score.success);
        }
    }
    for (SweepRow& row : rows)
        if (row.sequences > 0) {
            row.success /= row.sequences;
            row.precision /= row.sequences;
        }
    return rows;
}

} // namespace smat::synth
