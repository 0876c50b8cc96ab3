#include "smat/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "smat/checkpoint.hpp"
#include "smat/config.hpp"
#include "smat/experiments.hpp"
#include "smat/sequence_io.hpp"

namespace smat::commands {

namespace fs = std::filesystem;

namespace {

config::RunConfig with_overrides(config::RunConfig rc, const Options& opt) {
    for (const std::string& o : opt.overrides) rc.apply(o);
    if (opt.seed) rc.set("seed", std::to_string(*opt.seed));
    if (!opt.strategy.empty()) rc.set("tracker.strategy", opt.strategy);
    return rc;
}

config::RunConfig resolve(const Options& opt) {
    return with_overrides(opt.config.empty() ? config::RunConfig() : config::RunConfig::load(opt.config), opt);
}

/// Config of a checkpointed run: the given config file, or the embedded one.
config::RunConfig resolve_for(const checkpoint::Checkpoint& ck, const Options& opt) {
    config::RunConfig rc;
    if (opt.config.empty()) {
        std::istringstream is(ck.config_text);
        rc = with_overrides(config::RunConfig::parse(is, "checkpoint"), opt);
    } else {
        rc = resolve(opt);
    }
    if (rc.model_hash() != ck.model_hash)
        throw config::ConfigError("checkpoint/config hash mismatch: checkpoint model hash " +
                                  config::hex64(ck.model_hash) + ", config model hash " +
                                  config::hex64(rc.model_hash()));
    return rc;
}

checkpoint::Checkpoint require_checkpoint(const Options& opt) {
    if (opt.checkpoint.empty()) throw config::ConfigError("--checkpoint is required");
    return checkpoint::load(opt.checkpoint);
}

fs::path out_dir(const Options& opt) {
    fs::path dir(opt.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::DataError("cannot create output directory " + dir.string());
    return dir;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out | std::ios::trunc) {
    std::ofstream os(p, mode);
    if (!os) throw io::DataError("cannot write " + p.string());
    return os;
}

void write_config_header(std::ostream& os, const config::RunConfig& rc) {
    os << "# config_hash = " << config::hex64(rc.hash()) << '\n';
    std::istringstream lines(rc.to_text());
    std::string line;
    while (std::getline(lines, line)) os << "# " << line << '\n';
}

model::ModelPredictor predictor_for(const checkpoint::Checkpoint& ck, const config::RunConfig& rc) {
    const model::ModelConfig mc = config::model_config(rc);
    try {
        return model::ModelPredictor(ck.params, mc, rc.get_uint64("seed"));
    } catch (const std::invalid_argument& e) {
        throw config::ConfigError(std::string("checkpoint does not fit the model config: ") + e.what());
    }
}

std::vector<Sequence> eval_set(const Options& opt, const config::RunConfig& rc) {
    return opt.sequences.empty() ? experiments::evaluation_sequences(rc) : io::load_sequences(opt.sequences);
}

} // namespace

int train(const Options& opt, std::ostream& log) {
    const fs::path dir = out_dir(opt);
    std::optional<checkpoint::Checkpoint> resume;
    if (!opt.checkpoint.empty()) resume = checkpoint::load(opt.checkpoint);
    const config::RunConfig rc = resume ? resolve_for(*resume, opt) : resolve(opt);

    const model::ModelConfig mc = config::model_config(rc);
    const model::TrainConfig tc = config::train_config(rc);
    const std::vector<Sequence> data = experiments::training_sequences(rc);

    nn::ParameterSet ps;
    training::AdamW adam(training::AdamWConfig{tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
    if (resume) {
        ps = resume->params;
        try {
            model::check_compatible(ps, mc);
        } catch (const std::invalid_argument& e) {
            throw config::ConfigError(std::string("checkpoint does not fit the model config: ") + e.what());
        }
        adam.restore(resume->step, resume->adam_m, resume->adam_v);
    } else {
        model::init_model(ps, mc, tc.seed);
    }

    {
        std::ofstream cfg = open_out(dir / "config.resolved");
        cfg << "# config_hash = " << config::hex64(rc.hash()) << '\n' << rc.to_text();
    }
    std::ofstream metrics = open_out(dir / "metrics.jsonl", resume ? std::ios::out | std::ios::app
                                                                    : std::ios::out | std::ios::trunc);
    const std::string hash = config::hex64(rc.hash());

    model::Trainer trainer(mc, tc, data, ps, adam);
    const fs::path ckpt_path = dir / "checkpoint.bin";
    auto save = [&] {
        checkpoint::Checkpoint ck;
        ck.config_text = rc.to_text();
        ck.config_hash = rc.hash();
        ck.model_hash = rc.model_hash();
        ck.step = adam.steps();
        ck.params = ps;
        ck.adam_m = adam.first_moment();
        ck.adam_v = adam.second_moment();
        checkpoint::save(ckpt_path.string(), ck);
    };
    log << "training " << data.size() << " sequences, " << trainer.total_steps() << " steps, config " << hash
        << '\n';
    trainer.run([&](const model::StepMetrics& m) {
        nlohmann::ordered_json rec;
        rec["config_hash"] = hash;
        rec["step"] = m.step;
        rec["epoch"] = m.epoch;
        rec["loss"] = m.loss;
        rec["cls"] = m.cls;
        rec["l1"] = m.l1;
        rec["lr"] = m.lr;
        metrics << rec.dump() << '\n';
        if (m.step % trainer.steps_per_epoch() == 0) {
            metrics.flush();
            save();
            log << "epoch " << m.epoch << " step " << m.step << " loss " << m.loss << '\n';
        }
    });
    save();
    log << "wrote " << ckpt_path.string() << '\n';
    return kExitOk;
}

int eval(const Options& opt, std::ostream& log) {
    const checkpoint::Checkpoint ck = require_checkpoint(opt);
    const config::RunConfig rc = resolve_for(ck, opt);
    const fs::path dir = out_dir(opt);
    model::ModelPredictor predictor = predictor_for(ck, rc);
    const std::vector<Sequence> seqs = eval_set(opt, rc);
    const experiments::EvalResult res = experiments::evaluate(predictor, seqs, config::tracker_config(rc));

    std::ofstream results = open_out(dir / "results.txt");
    write_config_header(results, rc);
    experiments::write_frame_results(results, seqs, res);
    std::ofstream summary = open_out(dir / "summary.txt");
    write_config_header(summary, rc);
    experiments::write_summary(summary, res.rows);
    experiments::write_summary(log, res.rows);
    return kExitOk;
}

int sweep(const Options& opt, std::ostream& log) {
    const checkpoint::Checkpoint ck = require_checkpoint(opt);
    const config::RunConfig rc = resolve_for(ck, opt);
    const fs::path dir = out_dir(opt);
    model::ModelPredictor predictor = predictor_for(ck, rc);
    const config::DataConfig dc = config::data_config(rc);
    synth::ScenarioConfig base = dc.scenario;
    base.seed += dc.eval_seed;
    const std::vector<synth::SweepRow> rows = synth::sparsity_sweep(
        predictor, base, rc.get_int_list("sweep.counts"), rc.get_int("sweep.sequences"), config::tracker_config(rc));

    std::ofstream table = open_out(dir / "sweep.tsv");
    write_config_header(table, rc);
    experiments::write_sweep_table(table, rows);
    std::ofstream svg = open_out(dir / "sweep.svg");
    experiments::write_sweep_svg(svg, rows, "sparsity sweep, config " + config::hex64(rc.hash()) + "\n" + rc.to_text());
    experiments::write_sweep_table(log, rows);
    for (const synth::SweepRow& r : rows)
        if (r.empty()) log << "bucket " << r.count << " is empty\n";
    log << "spearman(points, success) = " << experiments::sweep_rank_correlation(rows) << '\n';
    return kExitOk;
}

int ablate(const Options& opt, std::ostream& log) {
    if (opt.matrix.empty()) throw config::ConfigError("--matrix is required");
    const config::RunConfig rc = resolve(opt);
    std::ifstream is(opt.matrix);
    if (!is) throw config::ConfigError("cannot read ablation matrix " + opt.matrix);
    const std::vector<experiments::Variant> variants = experiments::parse_matrix(is);
    std::vector<std::uint64_t> seeds;
    if (opt.seeds.empty()) {
        seeds.push_back(rc.get_uint64("seed"));
    } else {
        std::stringstream ss(opt.seeds);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                seeds.push_back(std::stoull(tok));
            } catch (const std::exception&) {
                throw config::ConfigError("bad seed list: " + opt.seeds);
            }
        }
    }
    const fs::path dir = out_dir(opt);
    const std::vector<experiments::AblationRow> rows =
        experiments::run_ablation(rc, variants, seeds, [&](const experiments::AblationRun& r) {
            log << r.label << " seed " << r.seed << ": success " << r.success << " precision " << r.precision << '\n';
        });
    std::ofstream table = open_out(dir / "ablation.tsv");
    write_config_header(table, rc);
    experiments::write_ablation_table(table, rows);
    experiments::write_ablation_table(log, rows);
    return kExitOk;
}

int generate(const Options& opt, std::ostream& log) {
    const config::RunConfig rc = resolve(opt);
    io::SeqFormat format;
    try {
        format = io::parse_format(opt.format);
    } catch (const std::invalid_argument& e) {
        throw config::ConfigError(e.what());
    }
    const fs::path dir = out_dir(opt);
    const fs::path path = dir / (format == io::SeqFormat::binary ? "sequences.bin" : "sequences.txt");
    const std::vector<Sequence> seqs = experiments::training_sequences(rc);
    io::save_sequences(path.string(), seqs, format);
    log << "wrote " << seqs.size() << " sequences to " << path.string() << '\n';
    return kExitOk;
}

int guarded(const std::function<int()>& command, std::ostream& err) {
    try {
        return command();
    } catch (const config::ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const io::DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const training::NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}

} // namespace smat::commands
