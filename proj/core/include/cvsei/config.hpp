#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvsei/fewshot.hpp"
#include "cvsei/model.hpp"
#include "cvsei/trainer.hpp"

namespace cvsei {

// Emitter group: profiles come from seeds [seed_start, seed_start+class_count).
struct ProfileGroupConfig {
    std::uint64_t seed_start = 0;
    int class_count = 0;
    int samples_per_class = 100;
};

struct SimulateConfig {
    std::uint64_t seed = 1;
    double severity = 0.7;
    double snr_db = 20.0;
    std::size_t length = 512;
    double sample_rate_hz = 8.0e6;
    ProfileGroupConfig auxiliary{0, 20, 100};
    ProfileGroupConfig pool{1000, 10, 100};
    std::string out_dir = ".";
};

struct TrainCliConfig {
    std::string dataset;
    std::string checkpoint = "model.ckpt";
    std::string telemetry = "telemetry.csv";
    ModelShape model;      // input_len/class_count filled from the dataset
    TrainConfig train;
};

struct AblateCliConfig {
    std::string auxiliary;
    std::string pool;
    std::string out_csv = "ablation.csv";
    ModelShape model;
    TrainConfig train;
    std::vector<int> shots{1, 5};
    FewShotConfig episode;  // ways/test_per_class/trials/seed used
};

// Parse + schema-validate JSON text. Violations raise invalid_config with a
// dotted field path in the message.
SimulateConfig parse_simulate_config(const std::string& json_text);
TrainCliConfig parse_train_config(const std::string& json_text);
AblateCliConfig parse_ablate_config(const std::string& json_text);

std::string read_text_file(const std::string& path);

}  // namespace cvsei
