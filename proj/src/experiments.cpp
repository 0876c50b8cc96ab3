#include "smat/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "smat/sequence_io.hpp"

namespace smat::experiments {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::vector<Sequence> training_sequences(const config::RunConfig& rc) {
    const config::DataConfig dc = config::data_config(rc);
    if (!dc.train_path.empty()) return io::load_sequences(dc.train_path);
    return synth::generate_dataset(dc.scenario, dc.train_sequences);
}

std::vector<Sequence> evaluation_sequences(const config::RunConfig& rc) {
    const config::DataConfig dc = config::data_config(rc);
    if (!dc.eval_path.empty()) return io::load_sequences(dc.eval_path);
    if (dc.eval_on_train) return training_sequences(rc);
    synth::ScenarioConfig sc = dc.scenario;
    sc.seed += dc.eval_seed;
    return synth::generate_dataset(sc, dc.eval_sequences);
}

TrainedModel train(const config::RunConfig& rc, const std::vector<Sequence>& data,
                   const std::function<void(const model::StepMetrics&)>& on_step) {
    TrainedModel tm{config::model_config(rc), {}, training::AdamW()};
    const model::TrainConfig tc = config::train_config(rc);
    tm.optimizer = training::AdamW(training::AdamWConfig{tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
    model::init_model(tm.params, tm.cfg, tc.seed);
    model::Trainer trainer(tm.cfg, tc, data, tm.params, tm.optimizer);
    trainer.run(on_step);
    return tm;
}

EvalResult evaluate(tracker::Predictor& predictor, const std::vector<Sequence>& seqs,
                    const tracker::TrackerConfig& tcfg) {
    EvalResult out;
    double err = 0.0;
    std::size_t frames = 0;
    for (const Sequence& seq : seqs) {
        out.tracks.push_back(tracker::track_sequence(seq, predictor, tcfg));
        const TrackScore& s = out.tracks.back().score;
        out.scores.push_back({seq.category, s});
        for (double d : s.distances) err += d;
        frames += s.distances.size();
    }
    out.rows = tracker::summarize(out.scores);
    out.mean_center_error = frames ? err / static_cast<double>(frames) : 0.0;
    return out;
}

void write_frame_results(std::ostream& os, const std::vector<Sequence>& seqs, const EvalResult& result) {
    os << "# sequence frame x y z w l h yaw score\n";
    os << std::setprecision(9);
    for (std::size_t s = 0; s < seqs.size() && s < result.tracks.size(); ++s) {
        const tracker::TrackResult& tr = result.tracks[s];
        for (std::size_t f = 0; f < tr.boxes.size(); ++f) {
            os << seqs[s].id << ' ' << f;
            for (double v : tr.boxes[f].to_array()) os << ' ' << v;
            os << ' ' << tr.scores[f] << '\n';
        }
    }
}

void write_summary(std::ostream& os, const std::vector<tracker::CategoryRow>& rows) {
    os << std::left << std::setw(12) << "category" << std::right << std::setw(8) << "frames" << std::setw(10)
       << "success" << std::setw(11) << "precision" << '\n';
    os << std::fixed << std::setprecision(2);
    for (const tracker::CategoryRow& r : rows)
        os << std::left << std::setw(12) << r.category << std::right << std::setw(8) << r.frames << std::setw(10)
           << r.success << std::setw(11) << r.precision << '\n';
    os.unsetf(std::ios::floatfield);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need at least two pairs");
    const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double sweep_rank_correlation(const std::vector<synth::SweepRow>& rows) {
    std::vector<double> x, y;
    for (const synth::SweepRow& r : rows)
        if (!r.empty()) {
            x.push_back(r.count);
            y.push_back(r.success);
        }
    return spearman(x, y);
}

void write_sweep_table(std::ostream& os, const std::vector<synth::SweepRow>& rows) {
    os << "points\tsequences\tsuccess\tprecision\n";
    os << std::fixed << std::setprecision(3);
    for (const synth::SweepRow& r : rows) {
        os << r.count << '\t' << r.sequences << '\t';
        if (r.empty())
            os << "empty\tempty\n";
        else
            os << r.success << '\t' << r.precision << '\n';
    }
    os.unsetf(std::ios::floatfield);
}

void write_sweep_svg(std::ostream& os, const std::vector<synth::SweepRow>& rows, const std::string& caption) {
    const double w = 520, h = 340, left = 60, right = 20, top = 30, bottom = 50;
    std::vector<const synth::SweepRow*> pts;
    for (const synth::SweepRow& r : rows)
        if (!r.empty() && r.count > 0) pts.push_back(&r);
    double lo = 0.0, hi = 1.0;
    if (!pts.empty()) {
        lo = std::log2(pts.front()->count);
        hi = std::log2(pts.back()->count);
        if (hi == lo) hi = lo + 1.0;
    }
    auto px = [&](double count) { return left + (std::log2(count) - lo) / (hi - lo) * (w - left - right); };
    auto py = [&](double pct) { return top + (1.0 - pct / 100.0) * (h - top - bottom); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<desc>" << escape_xml(caption) << "</desc>\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\"" << py(0)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(100)
       << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 100; tick += 20)
        os << "<text x=\"" << left - 8 << "\" y=\"" << py(tick) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << tick
           << "</text>\n";
    for (const synth::SweepRow* r : pts)
        os << "<text x=\"" << px(r->count) << "\" y=\"" << py(0) + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << r->count << "</text>\n";
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10
       << "\" font-size=\"12\" text-anchor=\"middle\">first-frame target points</text>\n";
    const std::pair<const char*, double synth::SweepRow::*> series[] = {{"#1f77b4", &synth::SweepRow::success},
                                                                         {"#d62728", &synth::SweepRow::precision}};
    for (const auto& [color, field] : series) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const synth::SweepRow* r : pts) os << px(r->count) << ',' << py(r->*field) << ' ';
        os << "\"/>\n";
        for (const synth::SweepRow* r : pts)
            os << "<circle cx=\"" << px(r->count) << "\" cy=\"" << py(r->*field) << "\" r=\"3\" fill=\"" << color
               << "\"/>\n";
    }
    os << "<text x=\"" << w - right - 100 << "\" y=\"" << top << "\" font-size=\"12\" fill=\"#1f77b4\">Success</text>\n";
    os << "<text x=\"" << w - right - 100 << "\" y=\"" << top + 16
       << "\" font-size=\"12\" fill=\"#d62728\">Precision</text>\n";
    os << "</svg>\n";
}

std::vector<Variant> parse_matrix(std::istream& is) {
    std::vector<Variant> out;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        Variant v;
        const auto colon = line.find(':');
        std::string rest = line;
        if (colon != std::string::npos) {
            std::istringstream label(line.substr(0, colon));
            label >> v.label;
            rest = line.substr(colon + 1);
        }
        std::istringstream ls(rest);
        std::string tok;
        while (ls >> tok) {
            if (tok.find('=') == std::string::npos) throw config::ConfigError("ablation override must be key=value: " + tok);
            v.overrides.push_back(tok);
        }
        if (v.label.empty() && v.overrides.empty()) continue;
        if (v.label.empty())
            for (const std::string& o : v.overrides) v.label += (v.label.empty() ? "" : ",") + o;
        out.push_back(std::move(v));
    }
    if (out.empty()) throw config::ConfigError("ablation matrix has no variants");
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<AblationRow> run_ablation(const config::RunConfig& base, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationRun&)>& on_run) {
    if (variants.empty()) throw config::ConfigError("ablation matrix has no variants");
    if (seeds.empty()) throw config::ConfigError("ablation needs at least one seed");
    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        AblationRow row;
        row.label = v.label;
        std::vector<double> succ, prec;
        for (std::uint64_t seed : seeds) {
            config::RunConfig rc = base;
            for (const std::string& o : v.overrides) rc.apply(o);
            rc.set("seed", std::to_string(seed));
            const std::vector<Sequence> train_set = training_sequences(rc);
            TrainedModel tm = train(rc, train_set);
            model::ModelPredictor predictor(tm.params, tm.cfg, seed);
            const EvalResult ev = evaluate(predictor, evaluation_sequences(rc), config::tracker_config(rc));
            const AblationRun run{v.label, seed, ev.rows.back().success, ev.rows.back().precision};
            row.runs.push_back(run);
            succ.push_back(run.success);
            prec.push_back(run.precision);
            if (on_run) on_run(run);
        }
        row.median_success = median(succ);
        row.median_precision = median(prec);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "variant\tseeds\tsuccess_median\tprecision_median\tsuccess_per_seed\n";
    os << std::fixed << std::setprecision(2);
    for (const AblationRow& r : rows) {
        os << r.label << '\t' << r.runs.size() << '\t' << r.median_success << '\t' << r.median_precision << '\t';
        for (std::size_t i = 0; i < r.runs.size(); ++i) os << (i ? "," : "") << r.runs[i].success;
        os << '\n';
    }
    os.unsetf(std::ios::floatfield);
}

} // namespace smat::experiments
