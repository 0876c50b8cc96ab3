#include "smat/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smat::model {

namespace {

const std::string kPillarNet = "pfn";
const std::string kBackbone = "backbone";
const std::string kEncoder = "mae";
const std::string kDecoder = "decoder";

} // namespace

pillars::PillarConfig template_preset() {
    pillars::PillarConfig cfg;
    cfg.area = Area3{-1.6, -1.6, -1.0, 1.6, 1.6, 1.0};
    cfg.dz = 2.0;
    return cfg;
}

void ModelConfig::validate() const {
    search.validate();
    templ.validate();
    backbone.validate();
    for (const pillars::PillarConfig* p : {&search, &templ})
        if (p->grid_h() % 32 != 0 || p->grid_w() % 32 != 0)
            throw std::invalid_argument("ModelConfig: pillar grids must be divisible by 32");
    if (backbone.in_channels != bev_channels)
        throw std::invalid_argument("ModelConfig: backbone input channels differ from the pillar channels");
    for (std::size_t i = 0; i < 4; ++i)
        if (mae.in_channels[i] != backbone.stages[i].channels)
            throw std::invalid_argument("ModelConfig: encoder input channels differ from the backbone");
    if (mae.width % 4 != 0 || mae.width % mae.heads != 0)
        throw std::invalid_argument("ModelConfig: encoder width must be a multiple of 4 and of the head count");
    if (dec.width != mae.width) throw std::invalid_argument("ModelConfig: decoder width differs from encoder width");
    if (dec.k < 1 || dec.k > proposal_height() * proposal_width())
        throw std::invalid_argument("ModelConfig: decoder.k exceeds the number of proposals");
}

int ModelConfig::proposal_height() const { return search.grid_h() / 4; }
int ModelConfig::proposal_width() const { return search.grid_w() / 4; }
nn::GridFrame ModelConfig::proposal_frame() const { return search.frame().downsampled(4); }

void init_model(nn::ParameterSet& ps, const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    pillars::init_pillar_net(ps, kPillarNet, cfg.bev_channels, rng);
    backbone::init_backbone(ps, kBackbone, cfg.backbone, rng);
    mae::init_mae(ps, kEncoder, cfg.mae, rng);
    decoder::init_decoder(ps, kDecoder, cfg.dec, rng);
}

void check_compatible(const nn::ParameterSet& ps, const ModelConfig& cfg) {
    nn::ParameterSet expected;
    init_model(expected, cfg, 0);
    if (expected.size() != ps.size())
        throw std::invalid_argument("parameters do not match the model config (" + std::to_string(ps.size()) +
                                    " tensors, expected " + std::to_string(expected.size()) + ")");
    for (const auto& [name, e] : expected.entries()) {
        if (!ps.contains(name)) throw std::invalid_argument("parameters lack " + name);
        if (!ps.entries().at(name).value.same_shape(e.value))
            throw std::invalid_argument("parameter " + name + " has shape " +
                                        ps.entries().at(name).value.shape_string() + ", expected " +
                                        e.value.shape_string());
    }
}

ForwardResult forward(nn::Graph& g, nn::ParameterSet& ps, const ModelConfig& cfg, const ModelInput& in,
                      const std::vector<int>* topk) {
    const nn::FeatureMap sbev = pillars::pillar_feature_net(g, ps, kPillarNet, in.search, cfg.search);
    const nn::FeatureMap tbev = pillars::pillar_feature_net(g, ps, kPillarNet, in.templ, cfg.templ);
    const backbone::MultiScaleFeatures sf = backbone::extract(g, ps, kBackbone, sbev, cfg.backbone);
    const backbone::MultiScaleFeatures tf = backbone::extract(g, ps, kBackbone, tbev, cfg.backbone);

    ForwardResult out;
    out.fused = mae::encode(g, ps, kEncoder, sf, tf, cfg.mae);
    if (cfg.dec.two_stage) {
        out.s1 = decoder::stage_one(g, ps, kDecoder, out.fused);
        out.sel = topk ? decoder::select_indices(out.s1, out.fused, *topk)
                       : decoder::select_topk(out.s1, out.fused, cfg.dec.k);
        nn::Var queries = decoder::make_queries(g, ps, kDecoder, out.sel);
        out.final_set = decoder::decode(g, ps, kDecoder, queries, out.sel.features, out.sel.boxes, cfg.dec);
    } else {
        nn::Var memory =
            ag::add(out.fused.tokens, g.constant(nn::positional_encoding(out.fused, out.fused.channels())));
        out.final_set = decoder::decode(g, ps, kDecoder, decoder::learned_queries(g, ps, kDecoder), memory, {}, cfg.dec);
    }
    return out;
}

StageOneTargets parse_stage_one_targets(const std::string& s) {
    if (s == "hungarian") return StageOneTargets::hungarian;
    if (s == "dense") return StageOneTargets::dense;
    throw std::invalid_argument("unknown stage-one target mode: " + s);
}

std::string to_string(StageOneTargets t) { return t == StageOneTargets::dense ? "dense" : "hungarian"; }

SampleLoss sample_loss(nn::Graph& g, nn::ParameterSet& ps, const ModelConfig& cfg, const ModelInput& in,
                       const training::LabelSet& labels, const training::LossWeights& w, StageOneTargets targets,
                       const FrozenMatch* frozen) {
    const ForwardResult fr = forward(g, ps, cfg, in, frozen ? &frozen->topk : nullptr);
    SampleLoss out;
    out.match.topk = fr.sel.indices;

    auto matched = [&](const decoder::PredictionSet& set) {
        return training::match(set.logits.value(), set.boxes.value(), labels, w);
    };
    if (cfg.dec.two_stage) {
        const decoder::PredictionSet s1 = fr.stage_one_set();
        out.match.stage_one = frozen ? frozen->stage_one
                              : targets == StageOneTargets::dense ? training::dense_assignment(labels)
                                                                  : matched(s1);
    }
    out.match.stage_two = frozen ? frozen->stage_two : matched(fr.final_set);

    const training::LossTerms last = training::set_loss(g, fr.final_set, labels, out.match.stage_two, w);
    out.total = last.total;
    out.cls = last.cls;
    out.l1 = last.l1;
    if (cfg.dec.two_stage) {
        const training::LossTerms first = training::set_loss(g, fr.stage_one_set(), labels, out.match.stage_one, w);
        out.total = ag::add(first.total, out.total);
        out.cls += first.cls;
        out.l1 += first.l1;
    }
    return out;
}

Sample make_sample(const Sequence& seq, int t, const ModelConfig& mcfg, const TrainConfig& tcfg, Rng& rng) {
    if (t < 1 || t >= seq.size()) throw std::invalid_argument("make_sample: frame index out of range");
    const Box3D& prev = seq.frames[static_cast<std::size_t>(t - 1)].gt;
    const Box3D& gt = seq.frames[static_cast<std::size_t>(t)].gt;
    const Vec3 c = prev.center();
    const Box3D anchor = prev.with_center(
        {c.x + tcfg.jitter * rng.normal(), c.y + tcfg.jitter * rng.normal(), c.z + 0.1 * tcfg.jitter * rng.normal()});

    std::vector<Box3D> history;
    for (int i = 0; i < t; ++i) history.push_back(seq.frames[static_cast<std::size_t>(i)].gt);
    const tracker::SearchCrop crop =
        tracker::crop_search(seq.frames[static_cast<std::size_t>(t)].cloud, anchor, mcfg.search.area);
    const PointCloud templ = tracker::crop_template(seq.frames, history, t, tcfg.strategy, tcfg.template_margin);

    Sample s;
    s.input.search = pillars::pillarize(crop.cloud, mcfg.search, rng.next_u64());
    s.input.templ = pillars::pillarize(templ, mcfg.templ, rng.next_u64());
    s.labels = training::augment_labels(crop.cloud, crop.to_local(gt), mcfg.proposal_frame(), mcfg.proposal_height(),
                                        mcfg.proposal_width());
    return s;
}

Trainer::Trainer(ModelConfig mcfg, TrainConfig tcfg, const std::vector<Sequence>& data, nn::ParameterSet& ps,
                 training::AdamW& opt)
    : mcfg_(std::move(mcfg)), tcfg_(std::move(tcfg)), data_(data), ps_(ps), opt_(opt) {
    mcfg_.validate();
    tcfg_.weights.validate();
    if (tcfg_.batch < 1 || tcfg_.epochs < 1) throw std::invalid_argument("TrainConfig: batch and epochs must be positive");
    for (std::size_t s = 0; s < data_.size(); ++s)
        for (int t = 1; t < data_[s].size(); ++t) items_.emplace_back(static_cast<int>(s), t);
    if (items_.empty()) throw std::invalid_argument("Trainer: no training frames");
}

long long Trainer::steps_per_epoch() const {
    return (static_cast<long long>(items_.size()) + tcfg_.batch - 1) / tcfg_.batch;
}

long long Trainer::total_steps() const {
    const long long all = steps_per_epoch() * tcfg_.epochs;
    return tcfg_.max_steps > 0 ? std::min(all, tcfg_.max_steps) : all;
}

StepMetrics Trainer::step() {
    const long long s = opt_.steps();
    const int epoch = static_cast<int>(s / steps_per_epoch());
    const long long pos = s % steps_per_epoch();

    Rng order_rng(tcfg_.seed ^ (0xA5A5A5A5ULL + static_cast<std::uint64_t>(epoch) * 0x100000001B3ULL));
    std::vector<int> order(items_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    const std::size_t begin = static_cast<std::size_t>(pos * tcfg_.batch);
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(tcfg_.batch));
    const double inv = 1.0 / static_cast<double>(end - begin);

    StepMetrics m;
    m.step = s + 1;
    m.epoch = epoch;
    m.lr = training::scheduled_lr(tcfg_.lr, tcfg_.milestones, epoch);
    ps_.zero_grad();
    for (std::size_t b = begin; b < end; ++b) {
        const auto [si, t] = items_[static_cast<std::size_t>(order[b])];
        Rng rng(tcfg_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) * 1000003ULL +
                static_cast<std::uint64_t>(order[b]));
        const Sample sample = make_sample(data_[static_cast<std::size_t>(si)], t, mcfg_, tcfg_, rng);
        nn::Graph g;
        const SampleLoss loss = sample_loss(g, ps_, mcfg_, sample.input, sample.labels, tcfg_.weights,
                                            tcfg_.stage_one_targets);
        const double value = loss.total.value()[0];
        if (!std::isfinite(value))
            throw training::NumericError("non-finite loss at step " + std::to_string(m.step) + " (sequence " +
                                         data_[static_cast<std::size_t>(si)].id + ", frame " + std::to_string(t) +
                                         ")");
        g.backward(ag::scale(loss.total, inv));
        m.loss += value * inv;
        m.cls += loss.cls * inv;
        m.l1 += loss.l1 * inv;
    }
    opt_.step(ps_, m.lr);
    return m;
}

void Trainer::run(const std::function<void(const StepMetrics&)>& on_step) {
    while (opt_.steps() < total_steps()) {
        const StepMetrics m = step();
        if (on_step) on_step(m);
    }
}

ModelPredictor::ModelPredictor(const nn::ParameterSet& ps, ModelConfig cfg, std::uint64_t seed)
    : ps_(ps), cfg_(std::move(cfg)), seed_(seed) {
    check_compatible(ps_, cfg_);
}

tracker::Prediction ModelPredictor::predict(const tracker::TrackInput& in) {
    ModelInput mi;
    mi.search = pillars::pillarize(in.search, cfg_.search, seed_ + 2 * static_cast<std::uint64_t>(in.frame));
    mi.templ = pillars::pillarize(in.templ, cfg_.templ, seed_ + 2 * static_cast<std::uint64_t>(in.frame) + 1);
    nn::Graph g(false);
    const ForwardResult fr = forward(g, ps_, cfg_, mi);
    const Tensor& logits = fr.final_set.logits.value();
    return {decoder::pick_best(fr.final_set, in.prev_local.size()), *std::max_element(logits.values().begin(), logits.values().end())};
}

} // namespace smat::model
