#include "cvsei/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cvsei/errors.hpp"

namespace cvsei {

namespace {

using nlohmann::json;

// Schema walker producing "a.b.c: <problem>" messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        require(j.is_object(), Errc::invalid_config, path_ + ": expected an object");
    }

    Node child(const char* key) const {
        auto it = j_->find(key);
        if (it == j_->end()) return Node(kEmpty, join(key));
        return Node(*it, join(key));
    }

    bool has(const char* key) const { return j_->contains(key); }

    template <class T>
    T number(const char* key, T fallback, double lo, double hi) const {
        auto it = j_->find(key);
        if (it == j_->end()) return fallback;
        require(it->is_number(), Errc::invalid_config, join(key) + ": expected a number");
        const double v = it->get<double>();
        require(v >= lo && v <= hi, Errc::invalid_config,
                join(key) + ": value " + std::to_string(v) + " outside [" + std::to_string(lo) +
                    ", " + std::to_string(hi) + "]");
        return static_cast<T>(v);
    }

    bool boolean(const char* key, bool fallback) const {
        auto it = j_->find(key);
        if (it == j_->end()) return fallback;
        require(it->is_boolean(), Errc::invalid_config, join(key) + ": expected a boolean");
        return it->get<bool>();
    }

    std::string text(const char* key, const std::string& fallback, bool required = false) const {
        auto it = j_->find(key);
        if (it == j_->end()) {
            require(!required, Errc::invalid_config, join(key) + ": required field missing");
            return fallback;
        }
        require(it->is_string(), Errc::invalid_config, join(key) + ": expected a string");
        return it->get<std::string>();
    }

    std::vector<int> int_list(const char* key, const std::vector<int>& fallback) const {
        auto it = j_->find(key);
        if (it == j_->end()) return fallback;
        require(it->is_array() && !it->empty(), Errc::invalid_config,
                join(key) + ": expected a non-empty array");
        std::vector<int> out;
        for (const auto& e : *it) {
            require(e.is_number_integer() && e.get<int>() >= 1, Errc::invalid_config,
                    join(key) + ": entries must be integers >= 1");
            out.push_back(e.get<int>());
        }
        return out;
    }

    void reject_unknown(std::initializer_list<const char*> known) const {
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool ok = false;
            for (const char* k : known)
                if (it.key() == k) ok = true;
            require(ok, Errc::invalid_config, join(it.key().c_str()) + ": unknown field");
        }
    }

private:
    std::string join(const char* key) const {
        return path_.empty() ? std::string(key) : path_ + "." + key;
    }

    static const json kEmpty;
    const json* j_;
    std::string path_;
};

const json Node::kEmpty = json::object();

json parse_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), Errc::invalid_config, "config is not valid JSON");
    return j;
}

ProfileGroupConfig parse_group(const Node& n, const ProfileGroupConfig& defaults) {
    n.reject_unknown({"seed_start", "class_count", "samples_per_class"});
    ProfileGroupConfig g;
    g.seed_start = n.number<std::uint64_t>("seed_start", defaults.seed_start, 0, 1e18);
    g.class_count = n.number<int>("class_count", defaults.class_count, 1, 65535);
    g.samples_per_class = n.number<int>("samples_per_class", defaults.samples_per_class, 1, 1e9);
    return g;
}

ModelShape parse_model(const Node& n) {
    n.reject_unknown({"depth", "n_ne", "ksize", "feat_dim", "dropout_rate"});
    ModelShape m;
    m.depth = n.number<std::size_t>("depth", 9, 1, 16);
    m.n_ne = n.number<std::size_t>("n_ne", 16, 1, 4096);
    m.ksize = n.number<std::size_t>("ksize", 3, 1, 63);
    m.feat_dim = n.number<std::size_t>("feat_dim", 1024, 1, 65536);
    m.dropout_rate = n.number<double>("dropout_rate", 0.5, 0.0, 0.999999);
    return m;
}

TrainConfig parse_train(const Node& n) {
    n.reject_unknown({"eta", "alpha", "epochs", "batch_size", "classes_per_batch",
                      "samples_per_class_in_batch", "seed", "val_fraction", "loss"});
    TrainConfig t;
    t.eta = n.number<double>("eta", 0.001, 1e-12, 1e3);
    t.alpha = n.number<double>("alpha", 0.001, 1e-12, 1e3);
    t.epochs = n.number<int>("epochs", 30, 1, 1e6);
    t.batch_size = n.number<int>("batch_size", 32, 2, 1e6);
    t.classes_per_batch = n.number<int>("classes_per_batch", 8, 2, 65535);
    t.samples_per_class_in_batch = n.number<int>("samples_per_class_in_batch", 4, 2, 1e6);
    t.seed = n.number<std::uint64_t>("seed", 1, 0, 1e18);
    t.val_fraction = n.number<double>("val_fraction", 0.3, 0.0, 0.9);
    Node loss = n.child("loss");
    loss.reject_unknown({"lambda", "margin", "use_triplet", "use_center"});
    t.loss.lambda = loss.number<double>("lambda", 0.01, 0.0, 1e6);
    t.loss.margin = loss.number<double>("margin", 5.0, 0.0, 1e9);
    t.loss.use_triplet = loss.boolean("use_triplet", true);
    t.loss.use_center = loss.boolean("use_center", true);
    require(t.classes_per_batch * t.samples_per_class_in_batch == t.batch_size,
            Errc::invalid_config,
            "train.batch_size: must equal classes_per_batch * samples_per_class_in_batch");
    return t;
}

}  // namespace

SimulateConfig parse_simulate_config(const std::string& json_text) {
    const json doc = parse_json(json_text);
    Node root(doc, "");
    root.reject_unknown({"seed", "severity", "snr_db", "length", "sample_rate_hz", "auxiliary",
                         "pool", "out_dir"});
    SimulateConfig cfg;
    cfg.seed = root.number<std::uint64_t>("seed", cfg.seed, 0, 1e18);
    cfg.severity = root.number<double>("severity", cfg.severity, 0.0, 1.0);
    cfg.snr_db = root.number<double>("snr_db", cfg.snr_db, -50.0, 1e9);
    cfg.length = root.number<std::size_t>("length", cfg.length, 16, 1e7);
    cfg.sample_rate_hz = root.number<double>("sample_rate_hz", cfg.sample_rate_hz, 4e6, 1e12);
    cfg.out_dir = root.text("out_dir", cfg.out_dir);
    if (root.has("auxiliary")) cfg.auxiliary = parse_group(root.child("auxiliary"), cfg.auxiliary);
    if (root.has("pool")) cfg.pool = parse_group(root.child("pool"), cfg.pool);

    // Disjoint emitter seed ranges keep the few-shot classes out of the
    // auxiliary class space.
    const auto a0 = cfg.auxiliary.seed_start;
    const auto a1 = a0 + static_cast<std::uint64_t>(cfg.auxiliary.class_count);
    const auto p0 = cfg.pool.seed_start;
    const auto p1 = p0 + static_cast<std::uint64_t>(cfg.pool.class_count);
    require(a1 <= p0 || p1 <= a0, Errc::invalid_config,
            "pool.seed_start: auxiliary and pool emitter seed ranges overlap");
    return cfg;
}

TrainCliConfig parse_train_config(const std::string& json_text) {
    const json doc = parse_json(json_text);
    Node root(doc, "");
    root.reject_unknown({"dataset", "checkpoint", "telemetry", "model", "train"});
    TrainCliConfig cfg;
    cfg.dataset = root.text("dataset", "", /*required=*/true);
    cfg.checkpoint = root.text("checkpoint", cfg.checkpoint);
    cfg.telemetry = root.text("telemetry", cfg.telemetry);
    cfg.model = parse_model(root.child("model"));
    cfg.train = parse_train(root.child("train"));
    return cfg;
}

AblateCliConfig parse_ablate_config(const std::string& json_text) {
    const json doc = parse_json(json_text);
    Node root(doc, "");
    root.reject_unknown({"auxiliary", "pool", "out_csv", "model", "train", "shots", "ways",
                         "test_per_class", "trials", "lr_reg", "lr_iters", "lr_step"});
    AblateCliConfig cfg;
    cfg.auxiliary = root.text("auxiliary", "", /*required=*/true);
    cfg.pool = root.text("pool", "", /*required=*/true);
    cfg.out_csv = root.text("out_csv", cfg.out_csv);
    cfg.model = parse_model(root.child("model"));
    cfg.train = parse_train(root.child("train"));
    cfg.shots = root.int_list("shots", cfg.shots);
    cfg.episode.ways = root.number<int>("ways", 10, 2, 65535);
    cfg.episode.test_per_class = root.number<int>("test_per_class", 50, 1, 1e9);
    cfg.episode.trials = root.number<int>("trials", 10, 1, 1e9);
    cfg.episode.lr_reg = root.number<double>("lr_reg", 1e-4, 0.0, 1e6);
    cfg.episode.lr_iters = root.number<int>("lr_iters", 500, 1, 1e9);
    cfg.episode.lr_step = root.number<double>("lr_step", 0.1, 1e-12, 1e3);
    cfg.episode.seed = cfg.train.seed;
    return cfg;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), Errc::invalid_config, "cannot open config file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace cvsei
