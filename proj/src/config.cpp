#include "smat/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace smat::config {

namespace {

constexpr std::array kKeys{
    KeyInfo{"seed", "0", "master seed for data, initialization and sampling"},
    KeyInfo{"data.train_sequences", "20", "synthetic training sequences"},
    KeyInfo{"data.eval_sequences", "20", "synthetic evaluation sequences"},
    KeyInfo{"data.frames", "10", "frames per synthetic sequence"},
    KeyInfo{"data.points_on_target", "256", "surface returns on the target per frame"},
    KeyInfo{"data.clutter_points", "150", "background points per frame"},
    KeyInfo{"data.speed", "0.3", "target speed, meters per frame"},
    KeyInfo{"data.yaw_rate", "0.02", "target yaw rate, radians per frame"},
    KeyInfo{"data.position_noise", "0.05", "process noise std on x and y, meters"},
    KeyInfo{"data.yaw_noise", "0.01", "process noise std on yaw, radians"},
    KeyInfo{"data.occluded_faces", "0", "visible faces whose returns are dropped"},
    KeyInfo{"data.box_size", "1.2,2.4,1.2", "target w,l,h in meters"},
    KeyInfo{"data.train_path", "", "training sequence file (empty: synthetic)"},
    KeyInfo{"data.eval_path", "", "evaluation sequence file (empty: synthetic)"},
    KeyInfo{"data.eval_on_train", "false", "evaluate on the training sequences"},
    KeyInfo{"data.eval_seed", "1000", "seed offset of the held-out synthetic sequences"},
    KeyInfo{"pillar.search_area", "-3.2,-3.2,-3,3.2,3.2,1", "search area relative to the previous center"},
    KeyInfo{"pillar.template_area", "-1.6,-1.6,-1,1.6,1.6,1", "template area in the box frame"},
    KeyInfo{"pillar.size", "0.1,0.1", "pillar dx,dy in meters"},
    KeyInfo{"pillar.max_points", "32", "points kept per pillar"},
    KeyInfo{"pillar.max_pillars", "4096", "pillars kept per crop"},
    KeyInfo{"pillar.channels", "16", "pillar feature channels"},
    KeyInfo{"backbone.preset", "desk-small", "desk-small or pvtv2-b2"},
    KeyInfo{"mae.width", "64", "encoder channel width"},
    KeyInfo{"mae.heads", "8", "cross-attention heads"},
    KeyInfo{"mae.depth", "1", "cross-attention blocks per site"},
    KeyInfo{"mae.ffn_hidden", "128", "encoder feed-forward width"},
    KeyInfo{"mae.positional", "true", "sinusoidal positions on queries and keys"},
    KeyInfo{"similarity", "attention", "attention, cosine, euclidean or xcorr"},
    KeyInfo{"fusion", "late", "late, early, c2 or c5"},
    KeyInfo{"decoder.k", "64", "proposals kept for the second stage / set size"},
    KeyInfo{"decoder.two_stage", "true", "two-stage queries (false: learned queries)"},
    KeyInfo{"decoder.heads", "8", "decoder attention heads"},
    KeyInfo{"decoder.depth", "1", "decoder attention blocks"},
    KeyInfo{"decoder.ffn_hidden", "128", "decoder feed-forward width"},
    KeyInfo{"train.epochs", "40", "passes over every training frame"},
    KeyInfo{"train.batch", "4", "samples per step"},
    KeyInfo{"train.lr", "0.0001", "initial learning rate"},
    KeyInfo{"train.weight_decay", "0.05", "decoupled weight decay"},
    KeyInfo{"train.milestones", "35,38", "epochs at which the rate drops 10x"},
    KeyInfo{"train.lambda_cls", "2.0", "classification loss weight"},
    KeyInfo{"train.lambda_l1", "5.0", "box L1 loss weight"},
    KeyInfo{"train.stage_one_targets", "hungarian", "hungarian or dense"},
    KeyInfo{"train.jitter", "0.3", "search-center perturbation std, meters"},
    KeyInfo{"train.template_strategy", "FP", "template strategy used for training samples"},
    KeyInfo{"train.max_steps", "0", "stop after this many steps (0: all epochs)"},
    KeyInfo{"tracker.strategy", "FP", "F, P, FP or AP"},
    KeyInfo{"tracker.margin", "0.25", "template crop margin, meters"},
    KeyInfo{"sweep.counts", "8,16,32,64,128,256", "first-frame target point buckets"},
    KeyInfo{"sweep.sequences", "30", "sequences per bucket"},
};

bool shapes_model(const std::string& key) {
    for (const char* prefix : {"pillar.", "backbone.", "mae.", "decoder."})
        if (key.rfind(prefix, 0) == 0) return true;
    return key == "similarity" || key == "fusion";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("config key " + key + ": cannot parse '" + text + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

Area3 area_from(const RunConfig& rc, const std::string& key) {
    const std::vector<double> v = rc.get_double_list(key);
    if (v.size() != 6) throw ConfigError("config key " + key + ": expected 6 values");
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

template <class F>
auto checked(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

} // namespace

std::span<const KeyInfo> known_keys() { return kKeys; }

RunConfig::RunConfig() {
    for (const KeyInfo& k : kKeys) values_[k.key] = k.default_value;
}

RunConfig RunConfig::parse(std::istream& is, const std::string& origin) {
    RunConfig rc;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        rc.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return rc;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    return parse(is, path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
}

void RunConfig::apply(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
long long RunConfig::get_int64(const std::string& key) const { return parse_number<long long>(key, get(key)); }
std::uint64_t RunConfig::get_uint64(const std::string& key) const {
    return parse_number<std::uint64_t>(key, get(key));
}
double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key " + key + ": expected true or false, got '" + v + "'");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& s : split_list(get(key)))
        if (!s.empty()) out.push_back(parse_number<int>(key, s));
    return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& s : split_list(get(key)))
        if (!s.empty()) out.push_back(parse_number<double>(key, s));
    return out;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_text()); }

std::uint64_t RunConfig::model_hash() const {
    std::string text;
    for (const auto& [k, v] : values_)
        if (shapes_model(k)) text += k + " = " + v + "\n";
    return fnv1a(text);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

model::ModelConfig model_config(const RunConfig& rc) {
    model::ModelConfig mc;
    const std::vector<double> size = rc.get_double_list("pillar.size");
    if (size.size() != 2) throw ConfigError("config key pillar.size: expected dx,dy");
    for (auto [p, key] : {std::pair{&mc.search, "pillar.search_area"}, std::pair{&mc.templ, "pillar.template_area"}}) {
        p->area = area_from(rc, key);
        p->dx = size[0];
        p->dy = size[1];
        p->dz = p->area.size_z();
        p->max_points_per_pillar = rc.get_int("pillar.max_points");
        p->max_pillars = rc.get_int("pillar.max_pillars");
    }
    mc.bev_channels = rc.get_int("pillar.channels");
    mc.backbone = checked("backbone.preset", [&] { return backbone::preset(rc.get("backbone.preset"), mc.bev_channels); });
    mc.mae.width = rc.get_int("mae.width");
    mc.mae.heads = rc.get_int("mae.heads");
    mc.mae.depth = rc.get_int("mae.depth");
    mc.mae.ffn_hidden = rc.get_int("mae.ffn_hidden");
    mc.mae.positional = rc.get_bool("mae.positional");
    mc.mae.similarity = checked("similarity", [&] { return mae::parse_similarity(rc.get("similarity")); });
    mc.mae.fusion = checked("fusion", [&] { return mae::parse_fusion(rc.get("fusion")); });
    for (std::size_t i = 0; i < 4; ++i) mc.mae.in_channels[i] = mc.backbone.stages[i].channels;
    mc.dec.k = rc.get_int("decoder.k");
    mc.dec.two_stage = rc.get_bool("decoder.two_stage");
    mc.dec.heads = rc.get_int("decoder.heads");
    mc.dec.depth = rc.get_int("decoder.depth");
    mc.dec.ffn_hidden = rc.get_int("decoder.ffn_hidden");
    mc.dec.width = mc.mae.width;
    checked("model config", [&] {
        mc.validate();
        return 0;
    });
    return mc;
}

model::TrainConfig train_config(const RunConfig& rc) {
    model::TrainConfig tc;
    tc.epochs = rc.get_int("train.epochs");
    tc.batch = rc.get_int("train.batch");
    tc.lr = rc.get_double("train.lr");
    tc.weight_decay = rc.get_double("train.weight_decay");
    tc.milestones = rc.get_int_list("train.milestones");
    tc.weights.cls = rc.get_double("train.lambda_cls");
    tc.weights.l1 = rc.get_double("train.lambda_l1");
    tc.stage_one_targets =
        checked("train.stage_one_targets", [&] { return model::parse_stage_one_targets(rc.get("train.stage_one_targets")); });
    tc.jitter = rc.get_double("train.jitter");
    tc.strategy = checked("train.template_strategy", [&] { return tracker::parse_strategy(rc.get("train.template_strategy")); });
    tc.template_margin = rc.get_double("tracker.margin");
    tc.max_steps = rc.get_int64("train.max_steps");
    tc.seed = rc.get_uint64("seed");
    if (tc.epochs < 1 || tc.batch < 1) throw ConfigError("train.epochs and train.batch must be positive");
    if (!(tc.lr > 0.0) || tc.weight_decay < 0.0) throw ConfigError("train.lr must be positive, weight decay nonnegative");
    checked("loss weights", [&] {
        tc.weights.validate();
        return 0;
    });
    return tc;
}

DataConfig data_config(const RunConfig& rc) {
    DataConfig dc;
    synth::ScenarioConfig& s = dc.scenario;
    s.n_frames = rc.get_int("data.frames");
    s.points_on_target = rc.get_int("data.points_on_target");
    s.clutter_points = rc.get_int("data.clutter_points");
    s.speed = rc.get_double("data.speed");
    s.yaw_rate = rc.get_double("data.yaw_rate");
    s.position_noise = rc.get_double("data.position_noise");
    s.yaw_noise = rc.get_double("data.yaw_noise");
    s.occluded_faces = rc.get_int("data.occluded_faces");
    const std::vector<double> size = rc.get_double_list("data.box_size");
    if (size.size() != 3) throw ConfigError("config key data.box_size: expected w,l,h");
    s.size = {size[0], size[1], size[2]};
    s.seed = rc.get_uint64("seed");
    checked("data config", [&] {
        s.validate();
        return 0;
    });
    dc.train_sequences = rc.get_int("data.train_sequences");
    dc.eval_sequences = rc.get_int("data.eval_sequences");
    dc.train_path = rc.get("data.train_path");
    dc.eval_path = rc.get("data.eval_path");
    dc.eval_on_train = rc.get_bool("data.eval_on_train");
    dc.eval_seed = rc.get_uint64("data.eval_seed");
    return dc;
}

tracker::TrackerConfig tracker_config(const RunConfig& rc) {
    tracker::TrackerConfig tk;
    tk.strategy = checked("tracker.strategy", [&] { return tracker::parse_strategy(rc.get("tracker.strategy")); });
    tk.template_margin = rc.get_double("tracker.margin");
    tk.search_area = area_from(rc, "pillar.search_area");
    return tk;
}

} // namespace smat::config
