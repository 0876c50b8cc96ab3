#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smat/backbone.hpp"
#include "smat/decoder.hpp"
#include "smat/mae_encoder.hpp"
#include "smat/pillars.hpp"
#include "smat/tracker.hpp"
#include "smat/training.hpp"

namespace smat::model {

/// Template pillar grid: [-1.6, 1.6] x [-1.6, 1.6] x [-1, 1] m in the box frame.
pillars::PillarConfig template_preset();

struct ModelConfig {
    pillars::PillarConfig search = pillars::car_search_preset();
    pillars::PillarConfig templ = template_preset();
    int bev_channels = 16;
    backbone::BackboneConfig backbone = backbone::desk_small(16);
    mae::MaeConfig mae;
    decoder::DecoderConfig dec;

    /// Cross-module consistency (channels, widths, grid divisibility, k).
    void validate() const;
    /// Stage-one grid (C_2 of the search branch).
    int proposal_height() const;
    int proposal_width() const;
    nn::GridFrame proposal_frame() const;
};

void init_model(nn::ParameterSet& ps, const ModelConfig& cfg, std::uint64_t seed);

/// Throws std::invalid_argument when `ps` does not hold exactly the
/// parameters (names and shapes) the config implies.
void check_compatible(const nn::ParameterSet& ps, const ModelConfig& cfg);

struct ModelInput {
    pillars::PillarTensor search;
    pillars::PillarTensor templ;
};

struct ForwardResult {
    nn::FeatureMap fused;
    decoder::StageOneOutput s1;
    decoder::Selection sel;
    /// Final set (stage two, or the learned-query set in one-stage mode).
    decoder::PredictionSet final_set;

    decoder::PredictionSet stage_one_set() const { return {s1.logits, s1.boxes}; }
};

/// `topk` (optional) replaces the score-based selection.
ForwardResult forward(nn::Graph& g, nn::ParameterSet& ps, const ModelConfig& cfg, const ModelInput& in,
                      const std::vector<int>* topk = nullptr);

enum class StageOneTargets { hungarian, dense };
StageOneTargets parse_stage_one_targets(const std::string& s);
std::string to_string(StageOneTargets t);

/// Selection and matchings of one forward pass; reusing it keeps the loss
/// a smooth function of the parameters.
struct FrozenMatch {
    std::vector<int> topk;
    training::Assignment stage_one;
    training::Assignment stage_two;
};

struct SampleLoss {
    nn::Var total;
    double cls = 0.0;
    double l1 = 0.0;
    FrozenMatch match;
};

/// Stage-one set loss plus final set loss.
SampleLoss sample_loss(nn::Graph& g, nn::ParameterSet& ps, const ModelConfig& cfg, const ModelInput& in,
                       const training::LabelSet& labels, const training::LossWeights& w, StageOneTargets targets,
                       const FrozenMatch* frozen = nullptr);

struct TrainConfig {
    int epochs = 40;
    int batch = 4;
    double lr = 1e-4;
    double weight_decay = 0.05;
    /// Epochs at which the rate drops by 10x.
    std::vector<int> milestones{35, 38};
    training::LossWeights weights;
    StageOneTargets stage_one_targets = StageOneTargets::hungarian;
    /// Std of the search-center perturbation around the previous gt (m).
    double jitter = 0.3;
    tracker::TemplateStrategy strategy = tracker::TemplateStrategy::FP;
    double template_margin = 0.25;
    /// Stop after this many steps in total (0: run every epoch).
    long long max_steps = 0;
    std::uint64_t seed = 0;
};

struct Sample {
    ModelInput input;
    training::LabelSet labels;
};

/// Training sample for frame t >= 1: template from the gt history, search
/// crop around the previous gt center moved by a random jitter, labels in
/// the search frame.
Sample make_sample(const Sequence& seq, int t, const ModelConfig& mcfg, const TrainConfig& tcfg, Rng& rng);

struct StepMetrics {
    long long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double cls = 0.0;
    double l1 = 0.0;
    double lr = 0.0;
};

/// Every (sequence, frame >= 1) pair once per epoch in a seeded order.
class Trainer {
public:
    Trainer(ModelConfig mcfg, TrainConfig tcfg, const std::vector<Sequence>& data, nn::ParameterSet& ps,
            training::AdamW& opt);

    long long steps_per_epoch() const;
    long long total_steps() const;
    /// Next step after opt.steps(); throws training::NumericError on a
    /// non-finite loss.
    StepMetrics step();
    void run(const std::function<void(const StepMetrics&)>& on_step);

private:
    ModelConfig mcfg_;
    TrainConfig tcfg_;
    const std::vector<Sequence>& data_;
    nn::ParameterSet& ps_;
    training::AdamW& opt_;
    std::vector<std::pair<int, int>> items_;
};

/// Runs the network on each frame and keeps the best-scoring box.
class ModelPredictor : public tracker::Predictor {
public:
    ModelPredictor(const nn::ParameterSet& ps, ModelConfig cfg, std::uint64_t seed = 0);
    tracker::Prediction predict(const tracker::TrackInput& in) override;

private:
    nn::ParameterSet ps_;
    ModelConfig cfg_;
    std::uint64_t seed_;
};

} // namespace smat::model
