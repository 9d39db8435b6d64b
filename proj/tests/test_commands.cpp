#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cvsei/commands.hpp"
#include "cvsei/errors.hpp"
#include "cvsei/manifest.hpp"
#include "cvsei/signal.hpp"

using namespace cvsei;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string small_sim_config(const TempDir& dir) {
    nlohmann::json j;
    j["seed"] = 5;
    j["severity"] = 0.6;
    j["snr_db"] = 20.0;
    j["length"] = 64;
    j["sample_rate_hz"] = 8e6;
    j["auxiliary"] = {{"seed_start", 0}, {"class_count", 8}, {"samples_per_class", 12}};
    j["pool"] = {{"seed_start", 100}, {"class_count", 4}, {"samples_per_class", 10}};
    j["out_dir"] = dir.path.string();
    return j.dump();
}

std::string write_train_config(const TempDir& dir, const std::string& dataset,
                               const std::string& ckpt, const std::string& csv) {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["checkpoint"] = ckpt;
    j["telemetry"] = csv;
    j["model"] = {{"depth", 3}, {"n_ne", 2}, {"feat_dim", 16}};
    j["train"] = {{"epochs", 1},
                  {"eta", 0.01},
                  {"batch_size", 16},
                  {"classes_per_batch", 8},
                  {"samples_per_class_in_batch", 2},
                  {"seed", 3},
                  {"loss", {{"lambda", 0.01}, {"margin", 5.0}}}};
    const std::string path = dir.file("train.json");
    std::ofstream os(path);
    os << j.dump();
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate with the default desk config writes 20+10 classes") {
    TempDir dir("cvsei_cmd_default");
    SimulateConfig cfg = parse_simulate_config("{}");
    cfg.out_dir = dir.path.string();
    cmd_simulate(cfg, {});

    const LabeledDataset aux = read_dataset(dir.file("auxiliary.ds"));
    const LabeledDataset pool = read_dataset(dir.file("pool.ds"));
    CHECK(aux.class_count == 20);
    CHECK(aux.size() == 2000);
    CHECK(aux.role == DatasetRole::auxiliary);
    CHECK(pool.class_count == 10);
    CHECK(pool.size() == 1000);
    CHECK(fs::exists(dir.file("simulate_manifest.json")));
}

TEST_CASE("simulate rejects overlapping emitter seed ranges") {
    const char* overlapping = R"({
        "auxiliary": {"seed_start": 0, "class_count": 20},
        "pool": {"seed_start": 10, "class_count": 10}
    })";
    try {
        parse_simulate_config(overlapping);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_config);
        CHECK(std::string(e.what()).find("overlap") != std::string::npos);
    }
}

TEST_CASE("config violations carry field paths") {
    try {
        parse_simulate_config(R"({"severity": 3.5})");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("severity") != std::string::npos);
    }
    try {
        parse_simulate_config(R"({"auxiliary": {"class_count": "many"}})");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("auxiliary.class_count") != std::string::npos);
    }
    try {
        parse_train_config(R"({"dataset": "d.ds", "train": {"etaa": 0.1}})");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("train.etaa") != std::string::npos);
    }
}

TEST_CASE("simulate reruns produce identical artifact digests") {
    TempDir dir("cvsei_cmd_repeat");
    const std::string cfg_text = small_sim_config(dir);
    cmd_simulate(parse_simulate_config(cfg_text), {});
    const std::string d1 = digest_file(dir.file("auxiliary.ds"));
    const std::string p1 = digest_file(dir.file("pool.ds"));
    cmd_simulate(parse_simulate_config(cfg_text), {});
    CHECK(digest_file(dir.file("auxiliary.ds")) == d1);
    CHECK(digest_file(dir.file("pool.ds")) == p1);

    // The master seed flag changes the outputs.
    CommonOverrides seeded;
    seeded.seed = 999;
    cmd_simulate(parse_simulate_config(cfg_text), seeded);
    CHECK(digest_file(dir.file("auxiliary.ds")) != d1);
}

TEST_CASE("train, eval, features and project round trip through files") {
    TempDir dir("cvsei_cmd_pipeline");
    cmd_simulate(parse_simulate_config(small_sim_config(dir)), {});

    const std::string ckpt = dir.file("model.ckpt");
    const std::string telemetry = dir.file("telemetry.csv");
    const std::string cfg_path =
        write_train_config(dir, dir.file("auxiliary.ds"), ckpt, telemetry);
    cmd_train(parse_train_config(read_text_file(cfg_path)), {});
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(telemetry));
    {
        std::ifstream is(telemetry);
        std::string header;
        std::getline(is, header);
        CHECK(header == "epoch,train_loss,val_loss,softmax_loss,triplet_loss,center_loss");
        std::string row;
        CHECK(std::getline(is, row).good());
    }

    EvalOptions eval;
    eval.checkpoints = {ckpt};
    eval.dataset = dir.file("pool.ds");
    eval.episode.ways = 3;
    eval.episode.shots = 2;
    eval.episode.test_per_class = 4;
    eval.episode.trials = 5;
    eval.episode.seed = 11;
    eval.out_json = dir.file("eval.json");
    eval.out_csv = dir.file("trials.csv");
    cmd_eval(eval, {});

    {
        std::ifstream is(eval.out_json);
        nlohmann::json j;
        is >> j;
        CHECK(j["trials"] == 5);
        CHECK(j["ensemble_size"] == 1);
        CHECK(j["accuracy"].contains("mean"));
        CHECK(j["accuracy"].contains("median"));
        CHECK(j["accuracy"].contains("lower_quartile"));
        CHECK(j["silhouette"]["per_member"].size() == 1);
        const double mean = j["accuracy"]["mean"];
        CHECK(mean >= 0.0);
        CHECK(mean <= 1.0);
    }
    {
        std::ifstream is(eval.out_csv);
        std::string line;
        std::getline(is, line);
        CHECK(line == "trial,accuracy");
        int rows = 0;
        while (std::getline(is, line) && !line.empty()) ++rows;
        CHECK(rows == 5);
    }

    // determinism: byte-identical summary + trials on rerun
    const std::string j1 = digest_file(eval.out_json);
    const std::string c1 = digest_file(eval.out_csv);
    cmd_eval(eval, {});
    CHECK(digest_file(eval.out_json) == j1);
    CHECK(digest_file(eval.out_csv) == c1);

    FeaturesOptions feats;
    feats.dataset = dir.file("pool.ds");
    feats.out_csv = dir.file("features.csv");
    cmd_features(feats);
    {
        std::ifstream is(feats.out_csv);
        std::string header;
        std::getline(is, header);
        CHECK(header.find("amp_mean") == 0);
        int rows = 0;
        std::string line;
        while (std::getline(is, line) && !line.empty()) ++rows;
        CHECK(rows == 40);  // 4 classes x 10
    }

    ProjectOptions proj;
    proj.dataset = dir.file("pool.ds");
    proj.checkpoint = ckpt;
    proj.out_csv = dir.file("projection.csv");
    cmd_project(proj);
    {
        std::ifstream is(proj.out_csv);
        std::string header;
        std::getline(is, header);
        CHECK(header == "x,y,label");
        int rows = 0;
        std::string line;
        while (std::getline(is, line) && !line.empty()) ++rows;
        CHECK(rows == 40);
    }

    // manifests list every artifact
    {
        std::ifstream is(ckpt + ".manifest.json");
        nlohmann::json m;
        is >> m;
        CHECK(m["outputs"].size() == 2);
        CHECK(m["tool_version"] == kToolVersion);
        CHECK(m["timings_ms"].contains("train"));
    }
}

TEST_CASE("ablate emits 4 variant rows x shots columns plus silhouette") {
    TempDir dir("cvsei_cmd_ablate");
    cmd_simulate(parse_simulate_config(small_sim_config(dir)), {});

    nlohmann::json j;
    j["auxiliary"] = dir.file("auxiliary.ds");
    j["pool"] = dir.file("pool.ds");
    j["out_csv"] = dir.file("ablation.csv");
    j["model"] = {{"depth", 3}, {"n_ne", 2}, {"feat_dim", 16}};
    j["train"] = {{"epochs", 1},
                  {"batch_size", 16},
                  {"classes_per_batch", 8},
                  {"samples_per_class_in_batch", 2},
                  {"seed", 3}};
    j["shots"] = {1, 2};
    j["ways"] = 3;
    j["test_per_class"] = 4;
    j["trials"] = 2;
    cmd_ablate(parse_ablate_config(j.dump()), {});

    std::ifstream is(dir.file("ablation.csv"));
    std::string header;
    std::getline(is, header);
    CHECK(header == "variant,acc_mean_1shot,acc_mean_2shot,silhouette");
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(is, line) && !line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("softmax,", 0) == 0);
    CHECK(rows[1].rfind("st,", 0) == 0);
    CHECK(rows[2].rfind("sc,", 0) == 0);
    CHECK(rows[3].rfind("stc,", 0) == 0);
}

}  // TEST_SUITE
