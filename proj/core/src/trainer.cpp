#include "cvsei/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cvsei/binio.hpp"
#include "cvsei/errors.hpp"

namespace cvsei {

EpochSampler::EpochSampler(const std::vector<int>& labels, int class_count, int classes_per_batch,
                           int per_class, Rng& rng)
    : p_(classes_per_batch), kb_(per_class) {
    require(p_ >= 1 && kb_ >= 1, Errc::invalid_config, "sampler: P and Kb must be positive");
    pools_.resize(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i)
        pools_[static_cast<std::size_t>(labels[i])].push_back(i);
    for (auto& pool : pools_) rng.shuffle(pool);
    cursor_.assign(pools_.size(), 0);

    priority_.resize(pools_.size());
    std::iota(priority_.begin(), priority_.end(), 0);
    rng.shuffle(priority_);

    int eligible = 0;
    for (const auto& pool : pools_)
        if (pool.size() >= static_cast<std::size_t>(kb_)) ++eligible;
    require(eligible >= p_, Errc::insufficient_class_data,
            "sampler needs at least " + std::to_string(p_) + " classes with " +
                std::to_string(kb_) + " samples each");
}

bool EpochSampler::next(std::vector<std::size_t>& indices) {
    struct Cand {
        std::size_t cls, remaining, prio;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < pools_.size(); ++c) {
        const std::size_t rem = pools_[c].size() - cursor_[c];
        if (rem >= static_cast<std::size_t>(kb_)) cands.push_back({c, rem, priority_[c]});
    }
    if (cands.size() < static_cast<std::size_t>(p_)) return false;
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.remaining != b.remaining ? a.remaining > b.remaining : a.prio < b.prio;
    });

    indices.clear();
    for (int j = 0; j < p_; ++j) {
        auto& pool = pools_[cands[static_cast<std::size_t>(j)].cls];
        auto& cur = cursor_[cands[static_cast<std::size_t>(j)].cls];
        for (int k = 0; k < kb_; ++k) indices.push_back(pool[cur++]);
    }
    return true;
}

std::vector<std::size_t> sample_batch(const LabeledDataset& data, const TrainConfig& cfg,
                                      Rng& rng) {
    EpochSampler sampler(data.labels, data.class_count, cfg.classes_per_batch,
                         cfg.samples_per_class_in_batch, rng);
    std::vector<std::size_t> indices;
    sampler.next(indices);
    return indices;
}

std::vector<Triplet> mine_triplets(const std::vector<int>& batch_labels, Rng& rng) {
    const std::size_t B = batch_labels.size();
    std::vector<std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < B; ++i) {
        const auto y = static_cast<std::size_t>(batch_labels[i]);
        if (y >= by_class.size()) by_class.resize(y + 1);
        by_class[y].push_back(i);
    }
    std::size_t classes_present = 0;
    for (const auto& g : by_class) classes_present += !g.empty();
    require(classes_present >= 2, Errc::no_valid_triplet,
            "triplet mining needs at least 2 classes in the batch");

    std::vector<Triplet> out;
    out.reserve(B);
    for (std::size_t a = 0; a < B; ++a) {
        const auto& same = by_class[static_cast<std::size_t>(batch_labels[a])];
        require(same.size() >= 2, Errc::no_valid_triplet,
                "anchor class has no positive sample in the batch");
        // positive: uniform over same-class others
        std::size_t pos;
        do {
            pos = same[rng.index(same.size())];
        } while (pos == a);
        // negative: uniform over all other-class samples
        const std::size_t others = B - same.size();
        std::size_t pick = rng.index(others);
        std::size_t neg = B;
        for (std::size_t i = 0; i < B; ++i) {
            if (batch_labels[i] == batch_labels[a]) continue;
            if (pick == 0) {
                neg = i;
                break;
            }
            --pick;
        }
        out.push_back({a, pos, neg});
    }
    return out;
}

void update_centers(Mat& centers, const Mat& batch_features, const std::vector<int>& batch_labels,
                    double alpha) {
    const std::size_t d = centers.cols;
    require(batch_features.cols == d, Errc::shape_mismatch, "update_centers: dim mismatch");

    std::vector<std::size_t> count(centers.rows, 0);
    Mat sum(centers.rows, d);
    for (std::size_t i = 0; i < batch_features.rows; ++i) {
        const auto y = static_cast<std::size_t>(batch_labels[i]);
        require(y < centers.rows, Errc::label_out_of_range, "update_centers: label has no center");
        ++count[y];
        const double* f = batch_features.row(i);
        double* s = sum.row(y);
        for (std::size_t k = 0; k < d; ++k) s[k] += f[k];
    }
    for (std::size_t y = 0; y < centers.rows; ++y) {
        if (count[y] == 0) continue;  // absent class: center bit-identical
        const double denom = 1.0 + static_cast<double>(count[y]);
        double* c = centers.row(y);
        const double* s = sum.row(y);
        for (std::size_t k = 0; k < d; ++k) {
            const double delta = (s[k] - static_cast<double>(count[y]) * c[k]) / denom;
            c[k] += alpha * delta;
        }
    }
}

namespace {

// Deterministic per-class 7:3 split of the auxiliary data.
void split_train_val(const LabeledDataset& aux, double val_fraction, std::uint64_t seed,
                     std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(aux.class_count));
    for (std::size_t i = 0; i < aux.labels.size(); ++i)
        by_class[static_cast<std::size_t>(aux.labels[i])].push_back(i);
    Rng rng(derive_seed(seed, stream::validation));
    for (auto& pool : by_class) {
        rng.shuffle(pool);
        auto n_val = static_cast<std::size_t>(
            std::floor(val_fraction * static_cast<double>(pool.size())));
        if (n_val >= pool.size()) n_val = pool.size() - 1;
        for (std::size_t i = 0; i < pool.size(); ++i)
            (i < n_val ? val_idx : train_idx).push_back(pool[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

struct BatchLoss {
    double loss, softmax_part, triplet_part, center_part;
};

// Loss of one index set in eval mode (telemetry only).
BatchLoss eval_loss(const EmbeddingModel& model, const LabeledDataset& data,
                    const std::vector<std::size_t>& indices, const LossConfig& loss_cfg,
                    Rng& mine_rng) {
    std::vector<CxTensor> tensors(indices.size());
    std::vector<int> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        tensors[i] = signal_to_tensor(data.signals[indices[i]]);
        labels[i] = data.labels[indices[i]];
    }
    BatchForward fwd = forward_batch(model, tensors, Mode::eval);
    std::vector<Triplet> triplets;
    if (loss_cfg.use_triplet) triplets = mine_triplets(labels, mine_rng);
    HybridResult h = hybrid_loss(fwd.logits, fwd.features, labels, triplets, model.centers,
                                 loss_cfg);
    return {h.loss, h.softmax_part, h.triplet_part, h.center_part};
}

}  // namespace

TrainResult train_embedding(const LabeledDataset& aux, const TrainConfig& cfg,
                            const ModelShape& shape) {
    require(aux.role == DatasetRole::auxiliary, Errc::invalid_config,
            "train_embedding expects an auxiliary-role dataset");
    require(cfg.classes_per_batch * cfg.samples_per_class_in_batch == cfg.batch_size,
            Errc::invalid_config, "P * Kb must equal batch_size");
    require(cfg.epochs >= 1 && cfg.eta > 0.0 && cfg.alpha > 0.0, Errc::invalid_config,
            "epochs must be >= 1 and learning rates positive");
    require(shape.class_count == static_cast<std::size_t>(aux.class_count), Errc::config_mismatch,
            "model class_count must match the auxiliary dataset");
    require(!aux.signals.empty() && aux.signals.front().length() == shape.input_len,
            Errc::shape_mismatch, "dataset signal length must match model input length");

    std::vector<std::size_t> train_idx, val_idx;
    split_train_val(aux, cfg.val_fraction, cfg.seed, train_idx, val_idx);
    std::vector<int> train_labels(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i)
        train_labels[i] = aux.labels[train_idx[i]];

    TrainResult result;
    result.model = init_embedding_model(shape, cfg.seed);
    EmbeddingModel& model = result.model;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, stream::batch, static_cast<std::uint64_t>(epoch)));
        Rng mine_rng(derive_seed(cfg.seed, stream::mining, static_cast<std::uint64_t>(epoch)));
        Rng drop_rng(derive_seed(cfg.seed, stream::dropout, static_cast<std::uint64_t>(epoch)));
        EpochSampler sampler(train_labels, aux.class_count, cfg.classes_per_batch,
                             cfg.samples_per_class_in_batch, epoch_rng);

        EpochStats stats;
        stats.epoch = epoch;
        int batches = 0;
        std::vector<std::size_t> batch_pos;
        while (sampler.next(batch_pos)) {
            std::vector<CxTensor> tensors(batch_pos.size());
            std::vector<int> labels(batch_pos.size());
            for (std::size_t i = 0; i < batch_pos.size(); ++i) {
                const std::size_t rec = train_idx[batch_pos[i]];
                tensors[i] = signal_to_tensor(aux.signals[rec]);
                labels[i] = aux.labels[rec];
            }

            ForwardTrace trace;
            BatchForward fwd = forward_batch(model, tensors, Mode::train, &drop_rng, &trace);
            commit_bn_updates(model, trace);

            std::vector<Triplet> triplets;
            if (cfg.loss.use_triplet) triplets = mine_triplets(labels, mine_rng);
            HybridResult h =
                hybrid_loss(fwd.logits, fwd.features, labels, triplets, model.centers, cfg.loss);
            if (!std::isfinite(h.loss))
                fail(Errc::non_finite_loss, "non-finite loss at epoch " + std::to_string(epoch) +
                                                ", batch " + std::to_string(batches));

            ModelGrads grads = backward_batch(model, trace, h.grad_features, h.grad_logits);
            sgd_step(model, grads, cfg.eta);
            update_centers(model.centers, fwd.features, labels, cfg.alpha);

            stats.train_loss += h.loss;
            stats.softmax_loss += h.softmax_part;
            stats.triplet_loss += h.triplet_part;
            stats.center_loss += h.center_part;
            ++batches;
        }
        require(batches > 0, Errc::insufficient_class_data,
                "training split yields no full batch");
        stats.train_loss /= batches;
        stats.softmax_loss /= batches;
        stats.triplet_loss /= batches;
        stats.center_loss /= batches;

        if (!val_idx.empty()) {
            Rng val_rng(
                derive_seed(cfg.seed, stream::validation, static_cast<std::uint64_t>(epoch), 1));
            BatchLoss v = eval_loss(model, aux, val_idx, cfg.loss, val_rng);
            stats.val_loss = v.loss;
            if (!std::isfinite(v.loss))
                fail(Errc::non_finite_loss,
                     "non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.telemetry.push_back(stats);
    }

    // Keep every parameter f32-representable so the checkpoint encodes the
    // returned model exactly.
    snap_model_f32(model);
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[7] = {'C', 'V', 'S', 'E', 'I', 'M', '1'};

std::size_t param_count(const EmbeddingModel& m) {
    std::size_t n = 0;
    for (const auto& c : m.conv) n += 2 * c.kernels.size() + 2 * c.biases.size();
    for (const auto& b : m.bn)
        n += b.gamma.size() + b.beta.size() + b.running_mean.size() + b.running_cov.size();
    n += m.head.dense_weight.size() + m.head.dense_bias.size();
    n += m.head.classifier_weight.size() + m.head.classifier_bias.size();
    n += m.centers.size();
    return n;
}

void collect_f32(const EmbeddingModel& m, std::vector<float>& out) {
    auto push_r = [&](const std::vector<double>& v) {
        for (double x : v) out.push_back(static_cast<float>(x));
    };
    auto push_c = [&](const std::vector<cxd>& v) {
        for (const cxd& x : v) {
            out.push_back(static_cast<float>(x.real()));
            out.push_back(static_cast<float>(x.imag()));
        }
    };
    for (std::size_t l = 0; l < m.conv.size(); ++l) {
        push_c(m.conv[l].kernels);
        push_c(m.conv[l].biases);
        push_r(m.bn[l].gamma);
        push_r(m.bn[l].beta);
        push_r(m.bn[l].running_mean);
        push_r(m.bn[l].running_cov);
    }
    push_r(m.head.dense_weight.v);
    push_r(m.head.dense_bias);
    push_r(m.head.classifier_weight.v);
    push_r(m.head.classifier_bias);
    push_r(m.centers.v);
}

class ParamReader {
public:
    explicit ParamReader(std::istream& is) : is_(is) {}
    void fill_r(std::vector<double>& v) {
        for (auto& x : v) x = static_cast<double>(binio::get_f32(is_, "parameter block"));
    }
    void fill_c(std::vector<cxd>& v) {
        for (auto& x : v) {
            const float re = binio::get_f32(is_, "parameter block");
            const float im = binio::get_f32(is_, "parameter block");
            x = {static_cast<double>(re), static_cast<double>(im)};
        }
    }

private:
    std::istream& is_;
};

}  // namespace

void save_checkpoint(const EmbeddingModel& m, const std::string& path) {
    nlohmann::ordered_json header;
    header["depth"] = m.shape.depth;
    header["n_ne"] = m.shape.n_ne;
    header["ksize"] = m.shape.ksize;
    header["input_len"] = m.shape.input_len;
    header["feat_dim"] = m.shape.feat_dim;
    header["class_count"] = m.shape.class_count;
    header["dropout_rate"] = m.shape.dropout_rate;
    header["lengths"] = m.stage_len;
    header["flat_dim"] = m.head.flat_dim;
    header["param_bytes"] = param_count(m) * 4;
    const std::string hj = header.dump();

    std::ofstream os(path, std::ios::binary);
    require(os.good(), Errc::corrupt_file, "cannot open for writing: " + path);
    binio::put_bytes(os, kCkptMagic, 7);
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(hj.size()));
    binio::put_bytes(os, hj.data(), hj.size());
    std::vector<float> params;
    params.reserve(param_count(m));
    collect_f32(m, params);
    binio::put_f32_block(os, params);
    require(os.good(), Errc::corrupt_file, "write failed: " + path);
}

EmbeddingModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), Errc::corrupt_file, "cannot open: " + path);
    char magic[7];
    binio::get_bytes(is, magic, 7, "magic");
    require(std::memcmp(magic, kCkptMagic, 7) == 0, Errc::corrupt_file,
            "bad checkpoint magic: " + path);
    const auto hlen = binio::get_le<std::uint32_t>(is, "header length");
    require(hlen > 0 && hlen < (1u << 20), Errc::corrupt_file, "bad header length: " + path);
    std::string hj(hlen, '\0');
    binio::get_bytes(is, hj.data(), hlen, "header");

    nlohmann::json header = nlohmann::json::parse(hj, nullptr, false);
    require(!header.is_discarded(), Errc::corrupt_file, "unparseable checkpoint header: " + path);

    ModelShape shape;
    try {
        shape.depth = header.at("depth").get<std::size_t>();
        shape.n_ne = header.at("n_ne").get<std::size_t>();
        shape.ksize = header.at("ksize").get<std::size_t>();
        shape.input_len = header.at("input_len").get<std::size_t>();
        shape.feat_dim = header.at("feat_dim").get<std::size_t>();
        shape.class_count = header.at("class_count").get<std::size_t>();
        shape.dropout_rate = header.at("dropout_rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::corrupt_file, std::string("checkpoint header missing field: ") + e.what());
    }

    EmbeddingModel m;
    m.shape = shape;
    m.stage_len.resize(shape.depth + 1);
    m.stage_len[0] = shape.input_len;
    std::size_t in_ch = 1;
    for (std::size_t l = 0; l < shape.depth; ++l) {
        m.conv.emplace_back(shape.n_ne, in_ch, shape.ksize, Padding::same);
        m.bn.emplace_back(shape.n_ne);
        m.stage_len[l + 1] = m.stage_len[l] / 2;
        in_ch = shape.n_ne;
    }
    const std::size_t flat_dim = 2 * m.stage_len[shape.depth] * shape.n_ne;
    m.head = DenseHeadParams(flat_dim, shape.feat_dim, shape.class_count);
    m.head.dropout_rate = shape.dropout_rate;
    m.centers = Mat(shape.class_count, shape.feat_dim);

    // Header consistency: shapes must agree with what the header promises.
    const auto lengths = header.value("lengths", std::vector<std::size_t>{});
    require(lengths == m.stage_len, Errc::config_mismatch,
            "checkpoint header lengths disagree with pooling arithmetic: " + path);
    require(header.value("flat_dim", std::size_t{0}) == flat_dim, Errc::config_mismatch,
            "checkpoint header flat_dim mismatch: " + path);
    require(header.value("param_bytes", std::size_t{0}) == param_count(m) * 4,
            Errc::config_mismatch,
            "checkpoint parameter size disagrees with declared shapes: " + path);

    ParamReader reader(is);
    for (std::size_t l = 0; l < shape.depth; ++l) {
        reader.fill_c(m.conv[l].kernels);
        reader.fill_c(m.conv[l].biases);
        reader.fill_r(m.bn[l].gamma);
        reader.fill_r(m.bn[l].beta);
        reader.fill_r(m.bn[l].running_mean);
        reader.fill_r(m.bn[l].running_cov);
    }
    reader.fill_r(m.head.dense_weight.v);
    reader.fill_r(m.head.dense_bias);
    reader.fill_r(m.head.classifier_weight.v);
    reader.fill_r(m.head.classifier_bias);
    reader.fill_r(m.centers.v);
    return m;
}

void write_telemetry_csv(const std::vector<EpochStats>& telemetry, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), Errc::corrupt_file, "cannot open for writing: " + path);
    os << "epoch,train_loss,val_loss,softmax_loss,triplet_loss,center_loss\n";
    char buf[256];
    for (const auto& e : telemetry) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.train_loss, e.val_loss, e.softmax_loss, e.triplet_loss, e.center_loss);
        os << buf;
    }
}

}  // namespace cvsei
