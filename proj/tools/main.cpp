// cvsei command line: simulate | train | eval | ablate | features | project
//
// Exit codes: 0 success, 1 usage, 2 data/config error, 3 numeric failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cvsei/commands.hpp"
#include "cvsei/errors.hpp"
#include "cvsei/manifest.hpp"
#include "cvsei/parallel.hpp"

namespace {

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

cvsei::CommonOverrides overrides(const GlobalFlags& g) {
    cvsei::CommonOverrides c;
    c.seed = g.seed;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot RF emitter identification pipeline"};
    app.set_version_flag("--version", std::string(cvsei::kToolVersion));
    app.require_subcommand(1);

    GlobalFlags global;
    std::uint64_t seed_value = 0;
    auto* seed_flag =
        app.add_option("--seed", seed_value, "Master seed overriding config seeds")
            ->expected(1);
    app.add_option("--threads", global.threads, "Worker thread cap (0 = hardware)");

    std::string sim_config, train_config, ablate_config;
    auto* sim = app.add_subcommand("simulate", "Generate auxiliary + few-shot pool datasets");
    sim->add_option("--config", sim_config, "Simulator JSON config (defaults when omitted)");

    auto* train = app.add_subcommand("train", "Train the feature embedding offline");
    train->add_option("--config", train_config, "Training JSON config")->required();

    cvsei::EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "Few-shot Monte Carlo evaluation");
    eval->add_option("--checkpoint", eval_opts.checkpoints,
                     "Checkpoint path (repeat for an ensemble)")
        ->required();
    eval->add_option("--dataset", eval_opts.dataset, "Few-shot pool dataset")->required();
    eval->add_option("--ways", eval_opts.episode.ways, "Episode class count");
    eval->add_option("--shots", eval_opts.episode.shots, "Training samples per class");
    eval->add_option("--test-per-class", eval_opts.episode.test_per_class,
                     "Test samples per class per episode");
    eval->add_option("--trials", eval_opts.episode.trials, "Monte Carlo episode count");
    eval->add_option("--lr-reg", eval_opts.episode.lr_reg, "Classifier L2 regularization");
    eval->add_option("--lr-iters", eval_opts.episode.lr_iters, "Classifier solver iterations");
    eval->add_option("--episode-seed", eval_opts.episode.seed, "Episode sampling seed");
    eval->add_option("--out-json", eval_opts.out_json, "Summary JSON path");
    eval->add_option("--out-csv", eval_opts.out_csv, "Per-trial CSV path");

    auto* ablate = app.add_subcommand("ablate", "Loss-variant comparison grid");
    ablate->add_option("--config", ablate_config, "Ablation JSON config")->required();

    cvsei::FeaturesOptions feat_opts;
    auto* features = app.add_subcommand("features", "Instantaneous-statistics baseline CSV");
    features->add_option("--dataset", feat_opts.dataset, "Input dataset")->required();
    features->add_option("--out", feat_opts.out_csv, "Output CSV path");

    cvsei::ProjectOptions proj_opts;
    auto* project = app.add_subcommand("project", "2-D feature projection CSV for plotting");
    project->add_option("--dataset", proj_opts.dataset, "Input dataset")->required();
    project->add_option("--checkpoint", proj_opts.checkpoint, "Embedding checkpoint")->required();
    project->add_option("--out", proj_opts.out_csv, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*seed_flag) global.seed = seed_value;
    cvsei::set_max_threads(global.threads);

    try {
        if (*sim) {
            const std::string text =
                sim_config.empty() ? "{}" : cvsei::read_text_file(sim_config);
            cvsei::cmd_simulate(cvsei::parse_simulate_config(text), overrides(global));
        } else if (*train) {
            cvsei::cmd_train(cvsei::parse_train_config(cvsei::read_text_file(train_config)),
                             overrides(global));
        } else if (*eval) {
            cvsei::cmd_eval(eval_opts, overrides(global));
        } else if (*ablate) {
            cvsei::cmd_ablate(cvsei::parse_ablate_config(cvsei::read_text_file(ablate_config)),
                              overrides(global));
        } else if (*features) {
            cvsei::cmd_features(feat_opts);
        } else if (*project) {
            cvsei::cmd_project(proj_opts);
        }
    } catch (const cvsei::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.numeric() ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
