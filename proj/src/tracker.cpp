#include "smat/tracker.hpp"

#include <map>
#include <stdexcept>

namespace smat::tracker {

TemplateStrategy parse_strategy(const std::string& s) {
    if (s == "F") return TemplateStrategy::F;
    if (s == "P") return TemplateStrategy::P;
    if (s == "FP" || s == "F&P") return TemplateStrategy::FP;
    if (s == "AP") return TemplateStrategy::AP;
    throw std::invalid_argument("unknown template strategy: " + s);
}

std::string to_string(TemplateStrategy s) {
    switch (s) {
    case TemplateStrategy::F: return "F";
    case TemplateStrategy::P: return "P";
    case TemplateStrategy::FP: return "FP";
    case TemplateStrategy::AP: return "AP";
    }
    return "?";
}

PointCloud crop_in_box(const PointCloud& pc, const Box3D& box, double margin) {
    const Box3D region = box.enlarged(margin);
    PointCloud out;
    for (const Point& p : pc.points) {
        if (!region.contains(p.position())) continue;
        const Vec3 l = box.to_local(p.position());
        out.points.push_back({l.x, l.y, l.z, p.intensity});
    }
    return out;
}

PointCloud crop_template(std::span<const Frame> frames, std::span<const Box3D> boxes, int t,
                         TemplateStrategy strategy, double margin) {
    if (t < 1 || static_cast<std::size_t>(t) > frames.size() || static_cast<std::size_t>(t) > boxes.size())
        throw std::invalid_argument("crop_template: needs frames and boxes for 0..t-1");
    auto crop = [&](int i) {
        return crop_in_box(frames[static_cast<std::size_t>(i)].cloud, boxes[static_cast<std::size_t>(i)], margin);
    };
    auto append = [](PointCloud& dst, const PointCloud& src) {
        dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
    };
    PointCloud out;
    switch (strategy) {
    case TemplateStrategy::F:
        return crop(0);
    case TemplateStrategy::P:
        return crop(t - 1);
    case TemplateStrategy::FP:
        out = crop(0);
        append(out, crop(t - 1));
        return out;
    case TemplateStrategy::AP:
        for (int i = 0; i < t; ++i) append(out, crop(i));
        return out;
    }
    return out;
}

Box3D SearchCrop::to_world(const Box3D& local) const {
    const Vec3& c = local.center();
    return local.with_center({c.x + offset.x, c.y + offset.y, c.z + offset.z});
}

Box3D SearchCrop::to_local(const Box3D& world) const {
    const Vec3& c = world.center();
    return world.with_center({c.x - offset.x, c.y - offset.y, c.z - offset.z});
}

SearchCrop crop_search(const PointCloud& frame, const Box3D& prev_box, const Area3& area) {
    SearchCrop out;
    out.offset = prev_box.center();
    for (const Point& p : frame.points) {
        const Point q{p.x - out.offset.x, p.y - out.offset.y, p.z - out.offset.z, p.intensity};
        if (area.contains(q.x, q.y, q.z)) out.cloud.points.push_back(q);
    }
    return out;
}

TrackResult track_sequence(const Sequence& seq, Predictor& predictor, const TrackerConfig& cfg) {
    if (seq.size() < 2) throw std::invalid_argument("track_sequence: need at least 2 frames");
    TrackResult out;
    out.boxes.push_back(seq.frames[0].gt);
    out.scores.push_back(0.0);
    for (int t = 1; t < seq.size(); ++t) {
        const Box3D& prev = out.boxes.back();
        const SearchCrop crop = crop_search(seq.frames[static_cast<std::size_t>(t)].cloud, prev, cfg.search_area);
        const PointCloud templ = crop_template(seq.frames, out.boxes, t, cfg.strategy, cfg.template_margin);
        const TrackInput in{crop.cloud, templ, crop.to_local(prev), t, crop};
        const Prediction p = predictor.predict(in);
        out.boxes.push_back(crop.to_world(Box3D(p.box.center(), prev.size(), p.box.yaw())));
        out.scores.push_back(p.score);
    }
    std::vector<Box3D> gt;
    for (const Frame& f : seq.frames) gt.push_back(f.gt);
    out.score = score_track(std::span<const Box3D>(out.boxes).subspan(1), std::span<const Box3D>(gt).subspan(1));
    return out;
}

std::vector<CategoryRow> summarize(const std::vector<SequenceScore>& results) {
    std::map<std::string, CategoryRow> by_cat;
    for (const SequenceScore& r : results) {
        CategoryRow& row = by_cat[r.category];
        row.category = r.category;
        const int n = static_cast<int>(r.score.ious.size());
        row.frames += n;
        row.success += n * r.score.success;
        row.precision += n * r.score.precision;
    }
    std::vector<CategoryRow> rows;
    CategoryRow mean{"Mean", 0, 0.0, 0.0};
    for (auto& [name, row] : by_cat) {
        mean.frames += row.frames;
        mean.success += row.success;
        mean.precision += row.precision;
        if (row.frames > 0) {
            row.success /= row.frames;
            row.precision /= row.frames;
        }
        rows.push_back(row);
    }
    if (mean.frames > 0) {
        mean.success /= mean.frames;
        mean.precision /= mean.frames;
    }
    rows.push_back(mean);
    return rows;
}

} // namespace smat::tracker
