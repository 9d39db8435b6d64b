#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvsei/losses.hpp"
#include "cvsei/model.hpp"
#include "cvsei/signal.hpp"

namespace cvsei {

struct TrainConfig {
    double eta = 0.001;                  // SGD learning rate
    double alpha = 0.001;                // center learning rate
    int epochs = 200;
    int batch_size = 32;
    int classes_per_batch = 8;           // P
    int samples_per_class_in_batch = 4;  // Kb; P * Kb must equal batch_size
    LossConfig loss;
    std::uint64_t seed = 0;
    double val_fraction = 0.3;           // 7:3 train/validation split, telemetry only
};

// Class-balanced batches: each batch is P distinct classes x Kb samples,
// drawn without replacement from a per-epoch shuffle. The epoch ends when
// fewer than P classes still hold Kb unused samples. Classes with the most
// unused samples are preferred so balanced data drains evenly.
class EpochSampler {
public:
    EpochSampler(const std::vector<int>& labels, int class_count, int classes_per_batch,
                 int per_class, Rng& rng);

    // Fills `indices` with P*Kb dataset positions; false once exhausted.
    bool next(std::vector<std::size_t>& indices);

private:
    int p_, kb_;
    std::vector<std::vector<std::size_t>> pools_;  // shuffled per-class indices
    std::vector<std::size_t> cursor_;
    std::vector<std::size_t> priority_;            // per-epoch tiebreak order
};

// One batch draw (a fresh epoch shuffle's first batch). Throws
// insufficient_class_data when fewer than P classes have Kb samples.
std::vector<std::size_t> sample_batch(const LabeledDataset& data, const TrainConfig& cfg,
                                      Rng& rng);

// Random within-batch mining: every element anchors one triplet, positive
// drawn uniformly from the anchor's class (excluding itself), negative
// uniformly from the other classes. Throws no_valid_triplet.
std::vector<Triplet> mine_triplets(const std::vector<int>& batch_labels, Rng& rng);

// Mini-batch center update, moving each present class's center toward the
// batch mean of its features:
//   delta = sum_b [y_b == a] (f_b - c_a) / (1 + sum_b [y_b == a])
//   c_a <- c_a + alpha * delta
// Classes absent from the batch are untouched (bit-exact).
void update_centers(Mat& centers, const Mat& batch_features, const std::vector<int>& batch_labels,
                    double alpha);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double softmax_loss = 0.0;  // train components, batch means
    double triplet_loss = 0.0;
    double center_loss = 0.0;
};

struct TrainResult {
    EmbeddingModel model;
    std::vector<EpochStats> telemetry;
};

// Offline feature-embedding training on the auxiliary dataset. Deterministic
// in (config, shape, seed): identical runs produce bit-identical models.
TrainResult train_embedding(const LabeledDataset& aux, const TrainConfig& cfg,
                            const ModelShape& shape);

// Checkpoint file: magic "CVSEIM1", u32 JSON header length, JSON header
// (shape, stage lengths, param byte count), then raw little-endian f32
// parameter blocks in declaration order (conv kernels/biases and CVBN
// gamma/beta/running stats per stage, dense, classifier, centers).
void save_checkpoint(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_checkpoint(const std::string& path);

void write_telemetry_csv(const std::vector<EpochStats>& telemetry, const std::string& path);

}  // namespace cvsei
