#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smat/random.hpp"
#include "smat/sequence.hpp"
#include "smat/tracker.hpp"

namespace smat::synth {

struct ScenarioConfig {
    int n_frames = 10;
    BoxSize size{1.2, 2.4, 1.2};
    Vec3 initial_center{10.0, 0.0, -0.9};
    double initial_yaw = 0.0;
    /// Replaces the initial yaw with a uniform draw in +-yaw_spread and
    /// shifts the initial center by up to +-center_spread in x and y.
    bool random_initial_pose = true;
    double yaw_spread = 0.785;
    double center_spread = 4.0;
    /// Meters per frame along the heading.
    double speed = 0.3;
    double yaw_rate = 0.02;
    double position_noise = 0.05;
    double yaw_noise = 0.01;
    int points_on_target = 256;
    int clutter_points = 150;
    /// Clutter region relative to the target center.
    Area3 clutter_area{-3.2, -3.2, -1.0, 3.2, 3.2, 1.0};
    /// Number of visible faces whose returns are dropped (at least one
    /// visible face is always kept).
    int occluded_faces = 0;
    std::string category = "Car";
    std::uint64_t seed = 0;

    void validate() const;
};

/// Box faces visible from a sensor at the origin (outward normal facing
/// it), as local-frame indices: 0 +x, 1 -x, 2 +y, 3 -y, 4 +z, 5 -z.
std::vector<int> visible_faces(const Box3D& box);

/// `count` points sampled uniformly (area-weighted) on the listed faces.
PointCloud sample_surface(const Box3D& box, const std::vector<int>& faces, int count, Rng& rng);

/// Noisy constant-velocity + yaw-rate trajectory with surface returns on
/// the target and uniform clutter outside it. Fully determined by the seed.
Sequence generate_sequence(const ScenarioConfig& cfg);

/// Sequences with seeds derived from base.seed and their index.
std::vector<Sequence> generate_dataset(const ScenarioConfig& base, int count);

/// Points of the first frame inside its gt box.
int first_frame_target_points(const Sequence& seq);

struct SweepRow {
    /// Upper end of the bucket (previous count, count].
    int count = 0;
    int sequences = 0;
    double success = 0.0;
    double precision = 0.0;
    /// Per-sequence scores, for rank statistics.
    std::vector<double> sequence_success;

    bool empty() const { return sequences == 0; }
};

/// For each count, `per_bucket` sequences with that many target points per
/// frame are generated and tracked; each is binned by its first-frame
/// target point count. Rows of empty buckets are kept with zero sequences.
std::vector<SweepRow> sparsity_sweep(tracker::Predictor& predictor, const ScenarioConfig& base,
                                     const std::vector<int>& counts, int per_bucket,
                                     const tracker::TrackerConfig& tcfg);

} // namespace smat::synth
