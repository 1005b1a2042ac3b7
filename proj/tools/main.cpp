#include <string>

#include <CLI11.hpp>

#include "dbn/cli.hpp"

namespace {

void add_common(CLI::App* cmd, dbn::RunConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--max-indegree", cfg.max_indegree,
                    "maximum parents per child");
    cmd->add_option("--max-lag", cfg.max_lag, "deepest parent lag");
    std::map<std::string, dbn::ScoreKind> scores{
        {"bic", dbn::ScoreKind::Bic}, {"bde", dbn::ScoreKind::Bde}};
    cmd->add_option("--score", cfg.score, "structure score")
        ->transform(CLI::CheckedTransformer(scores, CLI::ignore_case));
    cmd->add_option("--ess", cfg.bde_ess, "BDe equivalent sample size");
    cmd->add_option("--partition", cfg.partition_spec,
                    "'singletons' or a JSON cluster file");
    cmd->add_option("--buckets", cfg.buckets,
                    "bins for continuous columns");
    cmd->add_option("--continuous", cfg.continuous,
                    "columns to discretize")
        ->delimiter(',');
    cmd->add_option("--subsample", cfg.subsample,
                    "keep every k-th slice");
    cmd->add_option("--pseudocount", cfg.pseudocount,
                    "smoothing mass per family table");
    cmd->add_option("--stages", cfg.stages, "search candidate refreshes");
    cmd->add_option("--candidates", cfg.candidates_per_child,
                    "candidate parents per child");
    cmd->add_flag("--no-intra,!--intra", cfg.allow_intra_slice,
                  "forbid same-slice arcs")
        ->default_val(true);
    cmd->add_option("--em-tolerance", cfg.em_tolerance,
                    "relative log-likelihood tolerance");
    cmd->add_option("--em-iters", cfg.em_max_iters, "EM iteration cap");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete DBN learning: factored smoothing, structure "
                 "search and hidden-variable discovery"};
    app.require_subcommand(1);
    dbn::RunConfig cfg;

    auto* generate = app.add_subcommand("generate", "sample trajectories");
    generate->add_option("--model", cfg.model_path)->required();
    generate->add_option("--out", cfg.out_path)->required();
    generate->add_option("--sequences", cfg.sequences);
    generate->add_option("--length", cfg.length);
    generate->add_flag("--include-hidden", cfg.include_hidden);
    add_common(generate, cfg);

    auto* learn_params =
        app.add_subcommand("learn-params", "parametric EM on a fixed model");
    learn_params->add_option("--model", cfg.model_path)->required();
    learn_params->add_option("--data", cfg.data_path)->required();
    learn_params->add_option("--test-data", cfg.test_data_path);
    learn_params->add_option("--out", cfg.out_path)->required();
    add_common(learn_params, cfg);

    auto* learn_struct =
        app.add_subcommand("learn-struct", "structural EM (Markovian)");
    learn_struct->add_option("--model", cfg.model_path);
    learn_struct->add_option("--data", cfg.data_path)->required();
    learn_struct->add_option("--out", cfg.out_path)->required();
    add_common(learn_struct, cfg);

    auto* discover = app.add_subcommand(
        "discover", "hidden-variable discovery via Markov violations");
    discover->add_option("--data", cfg.data_path)->required();
    discover->add_option("--test-data", cfg.test_data_path);
    discover->add_option("--out", cfg.out_path, "output directory")
        ->required();
    discover->add_option("--iterations", cfg.iterations,
                         "structural iterations after iteration 0");
    discover->add_option("--epsilon", cfg.epsilon, "memory CPD noise");
    discover->add_option("--rho", cfg.rho, "persistence bias");
    discover->add_option("--depth-cap", cfg.depth_cap,
                         "maximum memory chain depth");
    discover->add_option("--split", cfg.split_fraction,
                         "train fraction when no --test-data");
    discover->add_option("--fhmm", cfg.fhmm_sizes,
                         "also fit FHMM baselines of these sizes")
        ->delimiter(',');
    add_common(discover, cfg);
    cfg.max_lag = 2; // discover looks one slice further back by default
    discover->get_option("--max-lag")->default_val(2);

    auto* eval = app.add_subcommand("eval", "held-out bits per slice");
    eval->add_option("--model", cfg.model_path)->required();
    eval->add_option("--data", cfg.data_path)->required();
    add_common(eval, cfg);

    auto* infer = app.add_subcommand("infer", "smoothed posterior marginals");
    infer->add_option("--model", cfg.model_path)->required();
    infer->add_option("--data", cfg.data_path)->required();
    infer->add_option("--out", cfg.out_path)->required();
    add_common(infer, cfg);

    CLI11_PARSE(app, argc, argv);

    cfg.command = app.get_subcommands().front()->get_name();
    return dbn::run_command(cfg);
}
