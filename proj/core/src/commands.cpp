#include "cvsei/commands.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "cvsei/baseline.hpp"
#include "cvsei/errors.hpp"
#include "cvsei/manifest.hpp"
#include "cvsei/metrics.hpp"

namespace cvsei {

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string config_digest_of(const nlohmann::ordered_json& j) { return digest_bytes(j.dump()); }

nlohmann::ordered_json simulate_config_json(const SimulateConfig& c) {
    return {{"seed", c.seed},
            {"severity", c.severity},
            {"snr_db", c.snr_db},
            {"length", c.length},
            {"sample_rate_hz", c.sample_rate_hz},
            {"auxiliary",
             {{"seed_start", c.auxiliary.seed_start},
              {"class_count", c.auxiliary.class_count},
              {"samples_per_class", c.auxiliary.samples_per_class}}},
            {"pool",
             {{"seed_start", c.pool.seed_start},
              {"class_count", c.pool.class_count},
              {"samples_per_class", c.pool.samples_per_class}}}};
}

LabeledDataset build_group(const ProfileGroupConfig& g, const SimulateConfig& c,
                           DatasetRole role, const std::string& provenance) {
    std::vector<EmitterProfile> profiles;
    profiles.reserve(static_cast<std::size_t>(g.class_count));
    for (int i = 0; i < g.class_count; ++i)
        profiles.push_back(
            make_emitter_profile(g.seed_start + static_cast<std::uint64_t>(i), c.severity));
    BurstParams params;
    params.length = c.length;
    params.sample_rate_hz = c.sample_rate_hz;
    LabeledDataset d = generate_dataset(profiles, g.samples_per_class, c.snr_db,
                                        derive_seed(c.seed, g.seed_start), params, role);
    d.provenance = provenance;
    return d;
}

}  // namespace

void cmd_simulate(SimulateConfig cfg, const CommonOverrides& common) {
    if (common.seed) cfg.seed = *common.seed;
    Stopwatch watch;

    const auto cfg_json = simulate_config_json(cfg);
    const std::string digest = config_digest_of(cfg_json);
    LabeledDataset aux = build_group(cfg.auxiliary, cfg, DatasetRole::auxiliary, digest);
    LabeledDataset pool = build_group(cfg.pool, cfg, DatasetRole::fewshot_train, digest);

    const std::string aux_path = join_path(cfg.out_dir, "auxiliary.ds");
    const std::string pool_path = join_path(cfg.out_dir, "pool.ds");
    write_dataset(aux, aux_path);
    write_dataset(pool, pool_path);

    RunManifest m;
    m.command = "simulate";
    m.config_digest = digest;
    m.seed = cfg.seed;
    m.add_output(aux_path);
    m.add_output(pool_path);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, join_path(cfg.out_dir, "simulate_manifest.json"));
}

void cmd_train(TrainCliConfig cfg, const CommonOverrides& common) {
    if (common.seed) cfg.train.seed = *common.seed;
    Stopwatch watch;

    LabeledDataset aux = read_dataset(cfg.dataset);
    cfg.model.input_len = aux.signals.empty() ? 0 : aux.signals.front().length();
    cfg.model.class_count = static_cast<std::size_t>(aux.class_count);

    Stopwatch train_watch;
    TrainResult result = train_embedding(aux, cfg.train, cfg.model);
    const double train_ms = train_watch.elapsed_ms();

    save_checkpoint(result.model, cfg.checkpoint);
    write_telemetry_csv(result.telemetry, cfg.telemetry);

    nlohmann::ordered_json cj;
    cj["dataset_provenance"] = digest_file(cfg.dataset);
    cj["model"] = {{"depth", cfg.model.depth},
                   {"n_ne", cfg.model.n_ne},
                   {"feat_dim", cfg.model.feat_dim},
                   {"input_len", cfg.model.input_len},
                   {"class_count", cfg.model.class_count}};
    cj["train"] = {{"eta", cfg.train.eta},
                   {"alpha", cfg.train.alpha},
                   {"epochs", cfg.train.epochs},
                   {"batch_size", cfg.train.batch_size},
                   {"seed", cfg.train.seed},
                   {"lambda", cfg.train.loss.lambda},
                   {"margin", cfg.train.loss.margin},
                   {"use_triplet", cfg.train.loss.use_triplet},
                   {"use_center", cfg.train.loss.use_center}};

    RunManifest m;
    m.command = "train";
    m.config_digest = config_digest_of(cj);
    m.seed = cfg.train.seed;
    m.add_output(cfg.checkpoint);
    m.add_output(cfg.telemetry);
    m.add_timing("train", train_ms);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, cfg.checkpoint + ".manifest.json");
}

void cmd_eval(EvalOptions opts, const CommonOverrides& common) {
    if (common.seed) opts.episode.seed = *common.seed;
    require(!opts.checkpoints.empty(), Errc::invalid_config, "eval needs >= 1 checkpoint");
    Stopwatch watch;

    std::vector<EmbeddingModel> models;
    models.reserve(opts.checkpoints.size());
    for (const auto& path : opts.checkpoints) models.push_back(load_checkpoint(path));
    std::vector<const EmbeddingModel*> members;
    for (const auto& m : models) members.push_back(&m);

    LabeledDataset pool = read_dataset(opts.dataset);
    MonteCarloStats stats = monte_carlo(members, pool, opts.episode);

    // Feature quality: silhouette of each member's embedding of the full pool.
    std::vector<std::size_t> all_idx(pool.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = i;
    std::vector<double> member_sc;
    for (const auto* m : members) {
        Mat f = embed_dataset(*m, pool, all_idx);
        member_sc.push_back(silhouette(f, pool.labels).sc);
    }
    double sc_mean = 0.0;
    for (double s : member_sc) sc_mean += s;
    sc_mean /= static_cast<double>(member_sc.size());

    {
        std::ofstream os(opts.out_csv);
        require(os.good(), Errc::corrupt_file, "cannot write: " + opts.out_csv);
        os << "trial,accuracy\n";
        for (std::size_t t = 0; t < stats.per_trial.size(); ++t)
            os << t << "," << fmt(stats.per_trial[t]) << "\n";
    }

    nlohmann::ordered_json j;
    j["ways"] = opts.episode.ways;
    j["shots"] = opts.episode.shots;
    j["test_per_class"] = opts.episode.test_per_class;
    j["trials"] = opts.episode.trials;
    j["ensemble_size"] = opts.checkpoints.size();
    j["seed"] = opts.episode.seed;
    j["accuracy"] = {{"mean", stats.mean},
                     {"median", stats.median},
                     {"lower_quartile", stats.lower_quartile},
                     {"upper_quartile", stats.upper_quartile},
                     {"min", stats.min},
                     {"max", stats.max}};
    j["silhouette"] = {{"per_member", member_sc}, {"mean", sc_mean}};
    j["per_trial_csv"] = opts.out_csv;
    {
        std::ofstream os(opts.out_json);
        require(os.good(), Errc::corrupt_file, "cannot write: " + opts.out_json);
        os << j.dump(2) << "\n";
    }

    nlohmann::ordered_json cj = j;
    cj.erase("accuracy");
    cj.erase("silhouette");
    RunManifest m;
    m.command = "eval";
    m.config_digest = config_digest_of(cj);
    m.seed = opts.episode.seed;
    m.add_note("ensemble_size", std::to_string(opts.checkpoints.size()));
    m.add_output(opts.out_json);
    m.add_output(opts.out_csv);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, opts.out_json + ".manifest.json");
}

void cmd_ablate(AblateCliConfig cfg, const CommonOverrides& common) {
    if (common.seed) {
        cfg.train.seed = *common.seed;
        cfg.episode.seed = *common.seed;
    }
    Stopwatch watch;

    LabeledDataset aux = read_dataset(cfg.auxiliary);
    LabeledDataset pool = read_dataset(cfg.pool);
    cfg.model.input_len = aux.signals.empty() ? 0 : aux.signals.front().length();
    cfg.model.class_count = static_cast<std::size_t>(aux.class_count);

    struct Variant {
        const char* name;
        bool triplet, center;
    };
    static constexpr Variant kVariants[] = {{"softmax", false, false},
                                            {"st", true, false},
                                            {"sc", false, true},
                                            {"stc", true, true}};

    std::vector<std::size_t> all_idx(pool.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = i;

    std::ofstream os(cfg.out_csv);
    require(os.good(), Errc::corrupt_file, "cannot write: " + cfg.out_csv);
    os << "variant";
    for (int k : cfg.shots) os << ",acc_mean_" << k << "shot";
    os << ",silhouette\n";

    RunManifest m;
    m.command = "ablate";
    m.seed = cfg.train.seed;
    for (const auto& variant : kVariants) {
        TrainConfig tc = cfg.train;
        tc.loss.use_triplet = variant.triplet;
        tc.loss.use_center = variant.center;
        Stopwatch vw;
        TrainResult result = train_embedding(aux, tc, cfg.model);
        std::vector<const EmbeddingModel*> member{&result.model};

        os << variant.name;
        for (int k : cfg.shots) {
            FewShotConfig ep = cfg.episode;
            ep.shots = k;
            MonteCarloStats stats = monte_carlo(member, pool, ep);
            os << "," << fmt(stats.mean);
        }
        Mat f = embed_dataset(result.model, pool, all_idx);
        os << "," << fmt(silhouette(f, pool.labels).sc) << "\n";
        m.add_timing(variant.name, vw.elapsed_ms());
    }
    os.close();

    nlohmann::ordered_json cj;
    cj["auxiliary"] = digest_file(cfg.auxiliary);
    cj["pool"] = digest_file(cfg.pool);
    cj["shots"] = cfg.shots;
    cj["ways"] = cfg.episode.ways;
    cj["trials"] = cfg.episode.trials;
    cj["seed"] = cfg.train.seed;
    m.config_digest = config_digest_of(cj);
    m.add_output(cfg.out_csv);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, cfg.out_csv + ".manifest.json");
}

void cmd_features(const FeaturesOptions& opts) {
    Stopwatch watch;
    LabeledDataset data = read_dataset(opts.dataset);
    std::ofstream os(opts.out_csv);
    require(os.good(), Errc::corrupt_file, "cannot write: " + opts.out_csv);
    os << "amp_mean,amp_var,amp_skew,amp_kurt,phase_mean,phase_var,phase_skew,phase_kurt,"
          "freq_mean,freq_var,freq_skew,freq_kurt,label\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        InstFeatureVector f = instantaneous_features(data.signals[i]);
        for (double v : f.values) os << fmt(v) << ",";
        os << data.labels[i] << "\n";
    }
    os.close();

    RunManifest m;
    m.command = "features";
    m.config_digest = digest_file(opts.dataset);
    m.add_output(opts.out_csv);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, opts.out_csv + ".manifest.json");
}

void cmd_project(const ProjectOptions& opts) {
    Stopwatch watch;
    LabeledDataset data = read_dataset(opts.dataset);
    EmbeddingModel model = load_checkpoint(opts.checkpoint);
    std::vector<std::size_t> all_idx(data.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = i;
    Mat features = embed_dataset(model, data, all_idx);
    PcaResult pca = pca_project(features);

    std::ofstream os(opts.out_csv);
    require(os.good(), Errc::corrupt_file, "cannot write: " + opts.out_csv);
    os << "x,y,label\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        os << fmt(pca.projected.at(i, 0)) << "," << fmt(pca.projected.at(i, 1)) << ","
           << data.labels[i] << "\n";
    os.close();

    RunManifest m;
    m.command = "project";
    m.config_digest = digest_file(opts.dataset);
    m.add_output(opts.out_csv);
    m.add_timing("total", watch.elapsed_ms());
    write_manifest(m, opts.out_csv + ".manifest.json");
}

}  // namespace cvsei
