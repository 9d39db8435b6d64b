#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "cvsei/errors.hpp"
#include "cvsei/trainer.hpp"

using namespace cvsei;

namespace {

// Two-class toy: tones at distinct frequencies plus light noise. Linearly
// separable in feature space, cheap to train.
LabeledDataset toy_dataset(int classes, int per_class, std::size_t len, std::uint64_t seed) {
    LabeledDataset d;
    d.class_count = classes;
    d.role = DatasetRole::auxiliary;
    Rng rng(seed);
    for (int c = 0; c < classes; ++c) {
        const double f = 0.08 + 0.12 * c;
        for (int i = 0; i < per_class; ++i) {
            ComplexSignal sig;
            sig.sample_rate_hz = 1e6;
            sig.samples.resize(len);
            for (std::size_t n = 0; n < len; ++n) {
                const double ang = 2.0 * 3.14159265358979323846 * f * static_cast<double>(n);
                sig.samples[n] = {static_cast<float>(std::cos(ang) + 0.05 * rng.normal()),
                                  static_cast<float>(std::sin(ang) + 0.05 * rng.normal())};
            }
            d.signals.push_back(std::move(sig));
            d.labels.push_back(c);
        }
    }
    return d;
}

ModelShape toy_shape(std::size_t classes) {
    ModelShape s;
    s.depth = 3;
    s.n_ne = 4;
    s.input_len = 64;
    s.feat_dim = 16;
    s.class_count = classes;
    return s;
}

bool files_equal(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return sa == sb;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("sample_batch draws P classes x Kb samples") {
    const LabeledDataset d = toy_dataset(10, 8, 64, 1);
    TrainConfig cfg;
    cfg.classes_per_batch = 8;
    cfg.samples_per_class_in_batch = 4;
    cfg.batch_size = 32;
    Rng rng(5);
    const auto batch = sample_batch(d, cfg, rng);
    REQUIRE(batch.size() == 32);
    std::map<int, int> counts;
    for (std::size_t i : batch) counts[d.labels[i]]++;
    CHECK(counts.size() == 8);
    for (const auto& [label, n] : counts) CHECK(n == 4);

    Rng rng2(5);
    CHECK(sample_batch(d, cfg, rng2) == batch);
}

TEST_CASE("an epoch covers every sample at most once") {
    const LabeledDataset d = toy_dataset(5, 9, 64, 2);
    Rng rng(3);
    EpochSampler sampler(d.labels, d.class_count, 4, 3, rng);
    std::set<std::size_t> seen;
    std::vector<std::size_t> batch;
    std::size_t total = 0;
    while (sampler.next(batch)) {
        for (std::size_t i : batch) {
            CHECK(seen.insert(i).second);  // never repeated within the epoch
            ++total;
        }
    }
    CHECK(total <= d.size());
    CHECK(total >= 36);  // 45 samples, 12 per batch, 3 full batches minimum
}

TEST_CASE("sampler rejects datasets with too few classes") {
    const LabeledDataset d = toy_dataset(3, 4, 64, 3);
    TrainConfig cfg;
    cfg.classes_per_batch = 8;
    cfg.samples_per_class_in_batch = 4;
    Rng rng(1);
    CHECK_THROWS_AS(sample_batch(d, cfg, rng), Error);
}

TEST_CASE("mined triplets respect label constraints") {
    const std::vector<int> labels{0, 0, 1, 1};
    Rng rng(7);
    const auto triplets = mine_triplets(labels, rng);
    REQUIRE(triplets.size() == 4);
    for (const auto& t : triplets) {
        CHECK(labels[t.anchor] == labels[t.pos]);
        CHECK(t.anchor != t.pos);
        CHECK(labels[t.anchor] != labels[t.neg]);
    }
    Rng rng2(7);
    const auto again = mine_triplets(labels, rng2);
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        CHECK(triplets[i].anchor == again[i].anchor);
        CHECK(triplets[i].pos == again[i].pos);
        CHECK(triplets[i].neg == again[i].neg);
    }
}

TEST_CASE("single-class batches cannot be mined") {
    Rng rng(1);
    const std::vector<int> labels{2, 2, 2};
    try {
        mine_triplets(labels, rng);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_valid_triplet);
    }
}

TEST_CASE("center update: absent classes bit-identical, single sample halves the gap") {
    Mat centers(3, 4);
    Rng rng(9);
    for (auto& v : centers.v) v = rng.normal();
    const Mat before = centers;

    Mat features(1, 4);
    features.at(0, 0) = 1.0;
    features.at(0, 1) = 1.0;
    // zero the updated row so delta = (f - 0) / 2
    for (std::size_t k = 0; k < 4; ++k) centers.at(1, k) = 0.0;
    update_centers(centers, features, {1}, 1.0);

    CHECK(centers.at(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(centers.at(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(centers.at(1, 2) == 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::memcmp(&centers.at(0, k), &before.at(0, k), sizeof(double)) == 0);
        CHECK(std::memcmp(&centers.at(2, k), &before.at(2, k), sizeof(double)) == 0);
    }
}

TEST_CASE("center already at the batch mean is a fixed point") {
    Mat centers(1, 3);
    Mat features(4, 3);
    Rng rng(11);
    for (auto& v : features.v) v = rng.normal();
    for (std::size_t k = 0; k < 3; ++k) {
        double m = 0.0;
        for (std::size_t i = 0; i < 4; ++i) m += features.at(i, k);
        centers.at(0, k) = m / 4.0;
    }
    const Mat before = centers;
    update_centers(centers, features, {0, 0, 0, 0}, 0.7);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(centers.at(0, k) == doctest::Approx(before.at(0, k)).epsilon(1e-12));
}

TEST_CASE("center update contracts toward the batch mean for alpha in (0,1]") {
    for (double alpha : {0.25, 0.5, 1.0}) {
        Mat centers(1, 3);
        centers.at(0, 0) = 5.0;
        Mat features(3, 3);
        Rng rng(13);
        for (auto& v : features.v) v = rng.normal();
        std::vector<double> mean(3, 0.0);
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < 3; ++i) mean[k] += features.at(i, k) / 3.0;

        auto gap = [&]() {
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                const double d = centers.at(0, k) - mean[k];
                s += d * d;
            }
            return std::sqrt(s);
        };
        const double before = gap();
        update_centers(centers, features, {0, 0, 0}, alpha);
        CHECK(gap() < before);
    }
}

TEST_CASE("one epoch on a separable toy set reduces the hybrid loss") {
    const LabeledDataset d = toy_dataset(2, 32, 64, 21);
    const ModelShape shape = toy_shape(2);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.eta = 0.05;
    cfg.alpha = 0.5;
    cfg.batch_size = 8;
    cfg.classes_per_batch = 2;
    cfg.samples_per_class_in_batch = 4;
    cfg.seed = 4;

    auto full_set_loss = [&](const EmbeddingModel& m) {
        std::vector<CxTensor> tensors;
        for (const auto& s : d.signals) tensors.push_back(signal_to_tensor(s));
        const BatchForward out = forward_batch(m, tensors, Mode::eval);
        Rng mine_rng(99);
        const auto triplets = mine_triplets(d.labels, mine_rng);
        return hybrid_loss(out.logits, out.features, d.labels, triplets, m.centers, cfg.loss)
            .loss;
    };

    const EmbeddingModel initial = init_embedding_model(shape, cfg.seed);
    const double loss_before = full_set_loss(initial);
    const TrainResult result = train_embedding(d, cfg, shape);
    const double loss_after = full_set_loss(result.model);
    CHECK(loss_after < loss_before);
    for (const auto& e : result.telemetry) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.val_loss));
    }
}

TEST_CASE("training is deterministic: bit-identical checkpoints") {
    const LabeledDataset d = toy_dataset(4, 12, 64, 31);
    ModelShape shape = toy_shape(4);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.classes_per_batch = 4;
    cfg.samples_per_class_in_batch = 2;
    cfg.seed = 9;

    const TrainResult a = train_embedding(d, cfg, shape);
    const TrainResult b = train_embedding(d, cfg, shape);
    const std::string pa = temp_path("cvsei_ckpt_a.bin");
    const std::string pb = temp_path("cvsei_ckpt_b.bin");
    save_checkpoint(a.model, pa);
    save_checkpoint(b.model, pb);
    CHECK(files_equal(pa, pb));
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
}

TEST_CASE("loss variants diverge in parameters after one epoch") {
    const LabeledDataset d = toy_dataset(2, 16, 64, 41);
    const ModelShape shape = toy_shape(2);
    TrainConfig stc;
    stc.epochs = 1;
    stc.batch_size = 8;
    stc.classes_per_batch = 2;
    stc.samples_per_class_in_batch = 4;
    stc.seed = 2;
    TrainConfig softmax_only = stc;
    softmax_only.loss.use_triplet = false;
    softmax_only.loss.use_center = false;

    const TrainResult a = train_embedding(d, stc, shape);
    const TrainResult b = train_embedding(d, softmax_only, shape);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.model.head.dense_weight.v.size(); ++i)
        any_diff |= a.model.head.dense_weight.v[i] != b.model.head.dense_weight.v[i];
    CHECK(any_diff);
    // centers move only when the center loss is enabled
    bool centers_moved_stc = false, centers_moved_softmax = false;
    for (double c : a.model.centers.v) centers_moved_stc |= c != 0.0;
    for (double c : b.model.centers.v) centers_moved_softmax |= c != 0.0;
    CHECK(centers_moved_stc);
    CHECK(centers_moved_softmax);  // the update rule runs regardless (Eq. behavior)
}

TEST_CASE("sgd step is exactly W - eta * grad") {
    const LabeledDataset d = toy_dataset(2, 8, 64, 51);
    const ModelShape shape = toy_shape(2);
    EmbeddingModel model = init_embedding_model(shape, 3);

    std::vector<CxTensor> tensors;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 8; ++i) {
        tensors.push_back(signal_to_tensor(d.signals[i * 2]));
        labels.push_back(d.labels[i * 2]);
    }
    ForwardTrace trace;
    Rng drop(7);
    const BatchForward out = forward_batch(model, tensors, Mode::train, &drop, &trace);
    Rng mine_rng(8);
    const auto triplets = mine_triplets(labels, mine_rng);
    const HybridResult h =
        hybrid_loss(out.logits, out.features, labels, triplets, model.centers, LossConfig{});
    const ModelGrads grads = backward_batch(model, trace, h.grad_features, h.grad_logits);

    const EmbeddingModel before = model;
    const double eta = 0.001;
    sgd_step(model, grads, eta);
    for (std::size_t l = 0; l < shape.depth; ++l) {
        for (std::size_t k = 0; k < model.conv[l].kernels.size(); ++k) {
            const cxd expect = before.conv[l].kernels[k] - eta * grads.conv[l].kernels[k];
            CHECK(model.conv[l].kernels[k] == expect);
        }
        for (std::size_t k = 0; k < model.bn[l].gamma.size(); ++k) {
            const double expect = before.bn[l].gamma[k] - eta * grads.bn[l].gamma[k];
            CHECK(model.bn[l].gamma[k] == expect);
        }
    }
    for (std::size_t k = 0; k < model.head.dense_weight.v.size(); ++k) {
        const double expect = before.head.dense_weight.v[k] - eta * grads.head.dense_weight.v[k];
        CHECK(model.head.dense_weight.v[k] == expect);
    }
}

TEST_CASE("checkpoint round trip preserves embed outputs exactly") {
    const LabeledDataset d = toy_dataset(3, 8, 64, 61);
    ModelShape shape = toy_shape(3);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 6;
    cfg.classes_per_batch = 3;
    cfg.samples_per_class_in_batch = 2;
    const TrainResult trained = train_embedding(d, cfg, shape);

    const std::string path = temp_path("cvsei_roundtrip.ckpt");
    save_checkpoint(trained.model, path);
    const EmbeddingModel loaded = load_checkpoint(path);

    std::vector<const ComplexSignal*> batch;
    for (const auto& s : d.signals) batch.push_back(&s);
    const Mat a = embed(trained.model, batch);
    const Mat b = embed(loaded, batch);
    REQUIRE(a.size() == b.size());
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        max_diff = std::max(max_diff, std::abs(a.v[i] - b.v[i]));
    CHECK(max_diff == 0.0);

    // save(load(save(m))) is byte-identical to save(m)
    const std::string path2 = temp_path("cvsei_roundtrip2.ckpt");
    save_checkpoint(loaded, path2);
    CHECK(files_equal(path, path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("corrupt and mismatched checkpoints are rejected") {
    ModelShape shape = toy_shape(3);
    const EmbeddingModel model = init_embedding_model(shape, 1);
    const std::string path = temp_path("cvsei_bad.ckpt");
    save_checkpoint(model, path);

    SUBCASE("truncated parameter block") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 64);
        try {
            load_checkpoint(path);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::corrupt_file);
        }
    }
    SUBCASE("tampered class_count header") {
        std::ifstream is(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        is.close();
        const auto pos = bytes.find("\"class_count\":3");
        REQUIRE(pos != std::string::npos);
        bytes.replace(pos, 15, "\"class_count\":4");
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.close();
        try {
            load_checkpoint(path);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::config_mismatch);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("training rejects non-auxiliary datasets") {
    LabeledDataset d = toy_dataset(2, 8, 64, 71);
    d.role = DatasetRole::test;
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.classes_per_batch = 2;
    cfg.samples_per_class_in_batch = 4;
    CHECK_THROWS_AS(train_embedding(d, cfg, toy_shape(2)), Error);
}

}  // TEST_SUITE
