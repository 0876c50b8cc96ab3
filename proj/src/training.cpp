#include "smat/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smat/hungarian.hpp"

namespace smat::training {

std::array<double, decoder::kBoxDims> box_state(const Box3D& box) {
    return {box.center().x, box.center().y, box.center().z, std::sin(box.yaw()), std::cos(box.yaw())};
}

void LossWeights::validate() const {
    if (cls < 0.0 || l1 < 0.0 || (cls == 0.0 && l1 == 0.0))
        throw std::invalid_argument("LossWeights: weights must be nonnegative and not both zero");
}

LabelSet augment_labels(const PointCloud& pc, const Box3D& gt, const nn::GridFrame& frame, int height, int width) {
    LabelSet labels;
    labels.target = box_state(gt);
    std::vector<char> occupied(static_cast<std::size_t>(height) * width, 0);
    for (const Point& p : pc.points) {
        if (!gt.contains(p.position(), kInsideTolerance)) continue;
        const double fx = std::floor((p.x - frame.x0) / frame.cell);
        const double fy = std::floor((p.y - frame.y0) / frame.cell);
        if (fx < 0 || fy < 0 || fx >= width || fy >= height) continue;
        occupied[static_cast<std::size_t>(fy) * width + static_cast<std::size_t>(fx)] = 1;
    }
    for (std::size_t c = 0; c < occupied.size(); ++c)
        if (occupied[c]) labels.cells.push_back(static_cast<int>(c));
    if (labels.cells.empty()) {
        const int ix = std::clamp(static_cast<int>(std::floor((gt.center().x - frame.x0) / frame.cell)), 0, width - 1);
        const int iy = std::clamp(static_cast<int>(std::floor((gt.center().y - frame.y0) / frame.cell)), 0, height - 1);
        labels.cells.push_back(iy * width + ix);
        labels.fallback = true;
    }
    return labels;
}

Tensor match_cost(const Tensor& logits, const Tensor& boxes, const LabelSet& labels, const LossWeights& w) {
    const int k = static_cast<int>(logits.size());
    const int n = labels.n_fg();
    Tensor cost = Tensor::matrix(k, n);
    for (int i = 0; i < k; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-logits[static_cast<std::size_t>(i)]));
        double l1 = 0.0;
        for (int c = 0; c < decoder::kBoxDims; ++c)
            l1 += std::fabs(boxes.at(i, c) - labels.target[static_cast<std::size_t>(c)]);
        for (int j = 0; j < n; ++j) cost.at(i, j) = -w.cls * prob + w.l1 * l1;
    }
    return cost;
}

Assignment match(const Tensor& logits, const Tensor& boxes, const LabelSet& labels, const LossWeights& w) {
    for (const Tensor* t : {&logits, &boxes})
        for (double v : t->values())
            if (!std::isfinite(v)) throw NumericError("non-finite prediction entering the matcher");
    const std::vector<int> rows = hungarian(match_cost(logits, boxes, labels, w));
    Assignment out;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i] >= 0) out.emplace_back(static_cast<int>(i), rows[i]);
    return out;
}

Assignment dense_assignment(const LabelSet& labels) {
    Assignment out;
    for (int j = 0; j < labels.n_fg(); ++j) out.emplace_back(labels.cells[static_cast<std::size_t>(j)], j);
    return out;
}

LossTerms set_loss(nn::Graph& g, const decoder::PredictionSet& preds, const LabelSet& labels,
                   const Assignment& assignment, const LossWeights& w) {
    const int k = preds.size();
    if (assignment.empty()) throw std::invalid_argument("set_loss: empty assignment");
    Tensor sign = Tensor::matrix(k, 1, 1.0);
    std::vector<int> matched;
    matched.reserve(assignment.size());
    for (const auto& [pred, label] : assignment) {
        if (pred < 0 || pred >= k || label < 0 || label >= labels.n_fg())
            throw std::invalid_argument("set_loss: assignment out of range");
        sign.at(pred, 0) = -1.0;
        matched.push_back(pred);
    }
    // Binary softmax CE with a zero background logit: softplus(-l) for the
    // object class, softplus(l) for background.
    nn::Var ce = ag::mean(ag::softplus(ag::mul(preds.logits, g.constant(std::move(sign)))));

    Tensor targets = Tensor::matrix(static_cast<int>(matched.size()), decoder::kBoxDims);
    for (int r = 0; r < targets.rows(); ++r)
        for (int c = 0; c < decoder::kBoxDims; ++c) targets.at(r, c) = labels.target[static_cast<std::size_t>(c)];
    nn::Var diff = ag::sub(ag::gather_rows(preds.boxes, matched), g.constant(std::move(targets)));
    nn::Var l1 = ag::scale(ag::sum(ag::abs(diff)), 1.0 / static_cast<double>(matched.size()));

    LossTerms out;
    out.cls = ce.value()[0];
    out.l1 = l1.value()[0];
    out.total = ag::add(ag::scale(ce, w.cls), ag::scale(l1, w.l1));
    return out;
}

void AdamW::step(nn::ParameterSet& ps, double lr) {
    for (const auto& [name, e] : ps.entries())
        for (double gr : e.grad.values())
            if (!std::isfinite(gr)) throw NumericError("non-finite gradient in " + name);
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, e] : ps.entries()) {
        if (!m_.contains(name)) {
            m_.add(name, Tensor::zeros_like(e.value));
            v_.add(name, Tensor::zeros_like(e.value));
        }
        double* m = m_.value(name).data();
        double* v = v_.value(name).data();
        double* x = e.value.data();
        const double* gr = e.grad.data();
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gr[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gr[i] * gr[i];
            x[i] -= lr * cfg_.weight_decay * x[i];
            x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        }
    }
}

void AdamW::restore(long long t, nn::ParameterSet m, nn::ParameterSet v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

double scheduled_lr(double base, const std::vector<int>& milestones, int epoch) {
    double lr = base;
    for (int m : milestones)
        if (epoch >= m) lr *= 0.1;
    return lr;
}

} // namespace smat::training
