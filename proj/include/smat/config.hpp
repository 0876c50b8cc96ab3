#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smat/model.hpp"
#include "smat/synthdata.hpp"
#include "smat/tracker.hpp"

namespace smat::config {

/// Unknown key, malformed value or unreadable config file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeyInfo {
    const char* key;
    const char* default_value;
    const char* doc;
};

/// Every accepted key with its default and a one-line description.
std::span<const KeyInfo> known_keys();

/// Flat key = value configuration; '#' starts a comment.
class RunConfig {
public:
    /// All keys at their defaults.
    RunConfig();

    static RunConfig parse(std::istream& is, const std::string& origin = "<config>");
    static RunConfig load(const std::string& path);

    /// Throws ConfigError for unknown keys.
    void set(const std::string& key, const std::string& value);
    /// "key=value" override.
    void apply(const std::string& assignment);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    long long get_int64(const std::string& key) const;
    std::uint64_t get_uint64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Sorted "key = value" lines.
    std::string to_text() const;
    /// FNV-1a 64 over to_text().
    std::uint64_t hash() const;
    /// Hash over the keys that shape the network parameters.
    std::uint64_t model_hash() const;

private:
    std::map<std::string, std::string> values_;
};

std::string hex64(std::uint64_t v);

struct DataConfig {
    synth::ScenarioConfig scenario;
    int train_sequences = 20;
    int eval_sequences = 20;
    /// Sequence files; empty means generate synthetic data.
    std::string train_path;
    std::string eval_path;
    /// Evaluate on the training sequences instead of a held-out set.
    bool eval_on_train = false;
    std::uint64_t eval_seed = 0;
};

model::ModelConfig model_config(const RunConfig& rc);
model::TrainConfig train_config(const RunConfig& rc);
DataConfig data_config(const RunConfig& rc);
tracker::TrackerConfig tracker_config(const RunConfig& rc);

} // namespace smat::config
