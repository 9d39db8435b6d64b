#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvsei/config.hpp"

namespace cvsei {

// Subcommand entry points. Each validates its inputs, writes its artifacts
// plus a RunManifest, and throws cvsei::Error on failure; the CLI front end
// maps error classes to exit codes.

struct CommonOverrides {
    std::optional<std::uint64_t> seed;  // master seed override (--seed)
};

void cmd_simulate(SimulateConfig cfg, const CommonOverrides& common);
void cmd_train(TrainCliConfig cfg, const CommonOverrides& common);

struct EvalOptions {
    std::vector<std::string> checkpoints;  // size defines the ensemble M
    std::string dataset;                   // few-shot pool
    FewShotConfig episode;
    std::string out_json = "eval_summary.json";
    std::string out_csv = "eval_trials.csv";
};

void cmd_eval(EvalOptions opts, const CommonOverrides& common);
void cmd_ablate(AblateCliConfig cfg, const CommonOverrides& common);

struct FeaturesOptions {
    std::string dataset;
    std::string out_csv = "features.csv";
};

void cmd_features(const FeaturesOptions& opts);

struct ProjectOptions {
    std::string dataset;
    std::string checkpoint;
    std::string out_csv = "projection.csv";
};

void cmd_project(const ProjectOptions& opts);

}  // namespace cvsei
