// Batch CLI over the training/editing pipeline: synth, train, edit, eval,
// plot. A strict JSON config drives each command; flags override config keys
// and SAMA_SEED overrides the seed.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sama/commands.hpp"
#include "sama/errors.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string workdir = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration JSON");
    cmd->add_option("--workdir", args.workdir, "root for all relative paths");
    cmd->add_option("--seed", args.seed, "override the config seed");
}

sama::RunConfig load_config(const CommonArgs& args) {
    sama::RunConfig cfg = args.config_path.empty()
                              ? sama::RunConfig::defaults()
                              : sama::RunConfig::from_file(args.config_path);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.train.seed = *args.seed;
        cfg.sampler.seed = *args.seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"factorized video-editing trainer on procedural clips"};
    app.require_subcommand(1);

    CommonArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus + manifest");
    add_common(synth, synth_args);

    CommonArgs train_args;
    std::optional<int> train_stage;
    std::optional<int> train_steps;
    bool no_sa = false, no_ma = false;
    std::string positional;
    CLI::App* train = app.add_subcommand("train", "run one training stage");
    add_common(train, train_args);
    train->add_option("--stage", train_stage, "training stage (0 or 1)");
    train->add_option("--steps", train_steps, "number of optimizer steps");
    train->add_flag("--no-sa", no_sa, "disable the semantic anchoring objective");
    train->add_flag("--no-ma", no_ma, "disable pretext transforms on stage-0 video items");
    train->add_option("--positional", positional, "type_embed | shifted");

    CommonArgs edit_args;
    std::string edit_checkpoint, edit_source, edit_instruction, edit_output, edit_ppm;
    std::optional<int> edit_steps;
    CLI::App* edit = app.add_subcommand("edit", "edit one clip with an instruction");
    add_common(edit, edit_args);
    edit->add_option("--checkpoint", edit_checkpoint, "checkpoint directory")->required();
    edit->add_option("--source", edit_source, "source clip (.vt)")->required();
    edit->add_option("--instruction", edit_instruction, "editing instruction")->required();
    edit->add_option("--output", edit_output, "output clip path");
    edit->add_option("--ppm-dir", edit_ppm, "directory for ASCII PPM frame dumps");
    edit->add_option("--steps", edit_steps, "integration steps");

    CommonArgs eval_args;
    std::string eval_checkpoint, eval_manifest;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint over a manifest");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
    eval->add_option("--manifest", eval_manifest, "held-out manifest (defaults to config path)");

    std::vector<std::string> plot_logs;
    std::string plot_out = "loss_curves.svg";
    std::string plot_column = "total";
    std::string plot_summary = "loss_summary.csv";
    CLI::App* plot = app.add_subcommand("plot", "render loss curves from training logs");
    plot->add_option("--logs", plot_logs, "training log CSVs")->required()->expected(-1);
    plot->add_option("--out", plot_out, "output SVG path");
    plot->add_option("--column", plot_column, "fm_loss | sem_loss | total");
    plot->add_option("--summary", plot_summary, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            sama::cmd_synth(load_config(synth_args), synth_args.workdir);
        } else if (train->parsed()) {
            sama::RunConfig cfg = load_config(train_args);
            if (train_stage) cfg.train.stage = *train_stage;
            if (train_steps) cfg.train.steps = *train_steps;
            if (no_sa) cfg.train.sa = false;
            if (no_ma) cfg.train.ma = false;
            if (!positional.empty()) {
                cfg.dit.positional = sama::positional_scheme_from_name(positional);
            }
            sama::cmd_train(cfg, train_args.workdir);
        } else if (edit->parsed()) {
            sama::RunConfig cfg = load_config(edit_args);
            if (!edit_output.empty()) cfg.paths.output_clip = edit_output;
            if (!edit_ppm.empty()) cfg.paths.ppm_dir = edit_ppm;
            if (edit_steps) cfg.sampler.steps = *edit_steps;
            sama::cmd_edit(cfg, edit_args.workdir, edit_checkpoint, edit_source, edit_instruction);
        } else if (eval->parsed()) {
            sama::RunConfig cfg = load_config(eval_args);
            const std::string manifest = eval_manifest.empty() ? cfg.paths.manifest : eval_manifest;
            sama::cmd_eval(cfg, eval_args.workdir, eval_checkpoint, manifest);
        } else if (plot->parsed()) {
            std::vector<std::filesystem::path> logs(plot_logs.begin(), plot_logs.end());
            sama::cmd_plot(logs, plot_out, plot_column, plot_summary);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return sama::exit_code_for_current_exception();
    }
    return 0;
}
