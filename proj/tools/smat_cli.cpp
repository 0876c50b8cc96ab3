#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "smat/commands.hpp"

int main(int argc, char** argv) {
    using namespace smat::commands;
    CLI::App app{"Siamese multi-scale attention tracker: training, evaluation and experiments"};
    app.require_subcommand(1);

    Options opt;
    std::uint64_t seed = 0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "key = value config file");
        sub->add_option("--seed", seed, "overrides the config seed")->each([&](const std::string&) { opt.seed = seed; });
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--set", opt.overrides, "key=value override (repeatable)");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    common(train_cmd);
    train_cmd->add_option("--checkpoint", opt.checkpoint, "resume from this checkpoint");

    CLI::App* eval_cmd = app.add_subcommand("eval", "track and score sequences");
    common(eval_cmd);
    eval_cmd->add_option("--checkpoint", opt.checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--strategy", opt.strategy, "template strategy")->check(CLI::IsMember({"F", "P", "FP", "AP"}));
    eval_cmd->add_option("--sequences", opt.sequences, "sequence file to evaluate");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "sparsity sweep table and plot");
    common(sweep_cmd);
    sweep_cmd->add_option("--checkpoint", opt.checkpoint, "trained checkpoint")->required();
    sweep_cmd->add_option("--strategy", opt.strategy, "template strategy")->check(CLI::IsMember({"F", "P", "FP", "AP"}));

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "train and compare config variants");
    common(ablate_cmd);
    ablate_cmd->add_option("--matrix", opt.matrix, "variant file: 'label: key=value ...' per line")->required();
    ablate_cmd->add_option("--seeds", opt.seeds, "comma-separated seeds");

    CLI::App* gen_cmd = app.add_subcommand("generate", "write synthetic sequences");
    common(gen_cmd);
    gen_cmd->add_option("--format", opt.format, "sequence file format")->check(CLI::IsMember({"text", "binary"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    auto run = [&](auto fn) { return guarded([&] { return fn(opt, std::cout); }, std::cerr); };
    if (*train_cmd) return run(train);
    if (*eval_cmd) return run(eval);
    if (*sweep_cmd) return run(sweep);
    if (*ablate_cmd) return run(ablate);
    return run(generate);
}
