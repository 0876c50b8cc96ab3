#pragma once

#include <span>
#include <string>
#include <vector>

#include "smat/geometry.hpp"
#include "smat/sequence.hpp"

namespace smat::tracker {

/// Template sources: first-frame gt (F), previous prediction (P), both
/// (FP), all previous predictions (AP).
enum class TemplateStrategy { F, P, FP, AP };

TemplateStrategy parse_strategy(const std::string& s);
std::string to_string(TemplateStrategy s);

struct TrackerConfig {
    TemplateStrategy strategy = TemplateStrategy::FP;
    /// Meters added to each side of the box before cropping the template.
    double template_margin = 0.25;
    /// Search region relative to the previous center.
    Area3 search_area{-3.2, -3.2, -3.0, 3.2, 3.2, 1.0};
};

/// Points inside box.enlarged(margin), expressed in the box frame.
PointCloud crop_in_box(const PointCloud& pc, const Box3D& box, double margin);

/// Template for frame t from frames 0..t-1 and their boxes (boxes[0] is
/// the first-frame gt). Unions keep duplicate points.
PointCloud crop_template(std::span<const Frame> frames, std::span<const Box3D> boxes, int t,
                         TemplateStrategy strategy, double margin);

/// Axis-aligned search crop translated so the previous center is the origin.
struct SearchCrop {
    PointCloud cloud;
    Vec3 offset;

    Box3D to_world(const Box3D& local) const;
    Box3D to_local(const Box3D& world) const;
};

SearchCrop crop_search(const PointCloud& frame, const Box3D& prev_box, const Area3& area);

/// Everything a predictor sees for one frame.
struct TrackInput {
    const PointCloud& search;
    const PointCloud& templ;
    /// Previous box in the search frame.
    Box3D prev_local;
    int frame = 0;
    const SearchCrop& crop;
};

struct Prediction {
    /// Box in the search-crop frame.
    Box3D box;
    double score = 0.0;
};

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict(const TrackInput& in) = 0;
};

struct TrackResult {
    std::vector<Box3D> boxes;
    /// Predictor score per frame (frame 0 has none and holds 0).
    std::vector<double> scores;
    /// Over frames 1..N-1.
    TrackScore score;
};

/// Frame 0 is initialized with its gt; later frames are predicted from the
/// previous estimate.
TrackResult track_sequence(const Sequence& seq, Predictor& predictor, const TrackerConfig& cfg);

struct SequenceScore {
    std::string category;
    TrackScore score;
};

struct CategoryRow {
    std::string category;
    int frames = 0;
    double success = 0.0;
    double precision = 0.0;
};

/// Per-category rows (frame-weighted over sequences) followed by a "Mean"
/// row weighted by each category's frame count.
std::vector<CategoryRow> summarize(const std::vector<SequenceScore>& results);

} // namespace smat::tracker
