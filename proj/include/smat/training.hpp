#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smat/decoder.hpp"
#include "smat/geometry.hpp"
#include "smat/point_cloud.hpp"

namespace smat::training {

/// Target state (x, y, z, sin yaw, cos yaw) of a box.
std::array<double, decoder::kBoxDims> box_state(const Box3D& box);

/// Foreground cells of the C_2 grid, each labelled with the one gt state.
struct LabelSet {
    std::array<double, decoder::kBoxDims> target{};
    /// Flattened (iy * width + ix) indices of foreground cells, ascending.
    std::vector<int> cells;
    /// True when no point fell in the box and the center cell was used.
    bool fallback = false;

    int n_fg() const { return static_cast<int>(cells.size()); }
};

struct LossWeights {
    double cls = 2.0;
    double l1 = 5.0;

    void validate() const;
};

/// Surface returns count as inside the box up to this distance (meters).
inline constexpr double kInsideTolerance = 1e-6;

/// Cells of a height x width grid placed by `frame` that hold at least one
/// point inside gt. No such cell -> the (clamped) cell containing the gt
/// center.
LabelSet augment_labels(const PointCloud& pc, const Box3D& gt, const nn::GridFrame& frame, int height, int width);

/// (prediction, label) pairs.
using Assignment = std::vector<std::pair<int, int>>;

/// cost(i, j) = -cls * sigmoid(logit_i) + l1 * |b_i - target|_1.
Tensor match_cost(const Tensor& logits, const Tensor& boxes, const LabelSet& labels, const LossWeights& w);
/// Hungarian assignment of min(k, N_fg) pairs, sorted by prediction index.
Assignment match(const Tensor& logits, const Tensor& boxes, const LabelSet& labels, const LossWeights& w);
/// Dense stage-one targets: the prediction at each foreground cell.
Assignment dense_assignment(const LabelSet& labels);

struct LossTerms {
    nn::Var total;
    double cls = 0.0;
    double l1 = 0.0;
};

/// w.cls * mean_k CE + w.l1 * mean_matched |b - target|_1. CE is binary
/// softmax with the background logit fixed at zero.
LossTerms set_loss(nn::Graph& g, const decoder::PredictionSet& preds, const LabelSet& labels,
                   const Assignment& assignment, const LossWeights& w);

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

/// Decoupled weight decay Adam. Moments are keyed by parameter name.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    void step(nn::ParameterSet& ps, double lr);

    long long steps() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }
    nn::ParameterSet& first_moment() { return m_; }
    nn::ParameterSet& second_moment() { return v_; }
    void restore(long long t, nn::ParameterSet m, nn::ParameterSet v);

private:
    AdamWConfig cfg_;
    long long t_ = 0;
    nn::ParameterSet m_;
    nn::ParameterSet v_;
};

/// Base rate times 0.1 per milestone epoch already reached.
double scheduled_lr(double base, const std::vector<int>& milestones, int epoch);

/// Thrown when a loss or gradient stops being finite.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace smat::training
