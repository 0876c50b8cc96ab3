#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "smat/config.hpp"
#include "smat/model.hpp"
#include "smat/synthdata.hpp"
#include "smat/tracker.hpp"

namespace smat::experiments {

/// Training set: the configured sequence file, or synthetic sequences.
std::vector<Sequence> training_sequences(const config::RunConfig& rc);
/// Evaluation set: the configured file, the training set, or held-out
/// synthetic sequences.
std::vector<Sequence> evaluation_sequences(const config::RunConfig& rc);

struct TrainedModel {
    model::ModelConfig cfg;
    nn::ParameterSet params;
    training::AdamW optimizer;
};

/// Fresh model trained for the configured budget.
TrainedModel train(const config::RunConfig& rc, const std::vector<Sequence>& data,
                   const std::function<void(const model::StepMetrics&)>& on_step = {});

struct EvalResult {
    std::vector<tracker::TrackResult> tracks;
    std::vector<tracker::SequenceScore> scores;
    std::vector<tracker::CategoryRow> rows;
    /// Mean center error over all evaluated frames, meters.
    double mean_center_error = 0.0;
};

EvalResult evaluate(tracker::Predictor& predictor, const std::vector<Sequence>& seqs,
                    const tracker::TrackerConfig& tcfg);

/// One line per frame: sequence id, frame index, box 7-tuple, score.
void write_frame_results(std::ostream& os, const std::vector<Sequence>& seqs, const EvalResult& result);
void write_summary(std::ostream& os, const std::vector<tracker::CategoryRow>& rows);

/// Spearman rank correlation with average ranks for ties. Throws when the
/// sizes differ or fewer than two pairs are given; returns 0 when either
/// side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Rank correlation of bucket count vs mean Success over non-empty rows.
double sweep_rank_correlation(const std::vector<synth::SweepRow>& rows);

void write_sweep_table(std::ostream& os, const std::vector<synth::SweepRow>& rows);
/// Success and Precision against the bucket count on a log2 axis.
void write_sweep_svg(std::ostream& os, const std::vector<synth::SweepRow>& rows, const std::string& caption);

/// One ablation variant: a label and key=value overrides.
struct Variant {
    std::string label;
    std::vector<std::string> overrides;
};

/// Lines of "label: key=value key=value ..." ('#' comments). A line with no
/// label uses its overrides as the label. Throws config::ConfigError when
/// there are no variants.
std::vector<Variant> parse_matrix(std::istream& is);

struct AblationRun {
    std::string label;
    std::uint64_t seed = 0;
    double success = 0.0;
    double precision = 0.0;
};

struct AblationRow {
    std::string label;
    std::vector<AblationRun> runs;
    double median_success = 0.0;
    double median_precision = 0.0;
};

/// Trains and evaluates every variant under every seed with the same budget.
std::vector<AblationRow> run_ablation(const config::RunConfig& base, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationRun&)>& on_run = {});

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows);

double median(std::vector<double> v);

} // namespace smat::experiments
