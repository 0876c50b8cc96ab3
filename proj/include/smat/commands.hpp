#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smat::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string checkpoint;
    std::string strategy;
    std::string format = "text";
    /// key=value overrides applied after the config file.
    std::vector<std::string> overrides;
    /// Sequence file used instead of the configured evaluation set.
    std::string sequences;
    /// Ablation matrix file.
    std::string matrix;
    /// Comma-separated seeds for ablation runs.
    std::string seeds;
};

/// Writes checkpoint.bin, metrics.jsonl and config.resolved into out.
/// With a checkpoint the run resumes at its step counter.
int train(const Options& opt, std::ostream& log);
/// Writes results.txt and summary.txt.
int eval(const Options& opt, std::ostream& log);
/// Writes sweep.tsv and sweep.svg.
int sweep(const Options& opt, std::ostream& log);
/// Writes ablation.tsv.
int ablate(const Options& opt, std::ostream& log);
/// Writes the training sequences to sequences.txt or sequences.bin.
int generate(const Options& opt, std::ostream& log);

/// Runs a command, mapping failures to exit codes: configuration 2, data 3,
/// numeric 4. The message goes to err.
int guarded(const std::function<int()>& command, std::ostream& err);

} // namespace smat::commands
