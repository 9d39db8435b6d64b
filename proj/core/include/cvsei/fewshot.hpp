#pragma once

#include <cstdint>
#include <vector>

#include "cvsei/model.hpp"
#include "cvsei/signal.hpp"
#include "cvsei/tensor.hpp"

namespace cvsei {

struct FewShotConfig {
    int ways = 10;            // C
    int shots = 5;            // K; N_tr = C * K
    int test_per_class = 50;  // 200 at full scale
    int trials = 50;          // Monte Carlo episode count (1000 at full scale)
    double lr_reg = 1e-4;     // L2 strength on the LR weights
    int lr_iters = 500;
    double lr_step = 0.1;
    std::uint64_t seed = 0;
};

struct LinearClassifier {
    Mat weight;                // [feat_dim x ways]
    std::vector<double> bias;  // [ways]
};

struct FewShotSplit {
    // Dataset record positions; labels remapped to [0, ways).
    std::vector<std::size_t> train_idx, test_idx;
    std::vector<int> train_labels, test_labels;
    std::vector<int> chosen_classes;  // original pool labels, in remap order
};

// Draws C classes, K train + test_per_class disjoint test samples per class.
// Throws insufficient_data.
FewShotSplit split_fewshot(const LabeledDataset& pool, const FewShotConfig& cfg, Rng& rng);

// Multinomial logistic regression: full-batch gradient descent on the mean
// NLL + reg/2 * ||W||^2 from zero init, fixed step, deterministic.
// Throws non_finite_loss. `objective_trace` (optional) records the objective
// before each step.
LinearClassifier fit_lr(const Mat& features, const std::vector<int>& labels, int classes,
                        double reg, int iters, double step,
                        std::vector<double>* objective_trace = nullptr);

// Row-wise softmax of the affine map.
Mat predict_proba(const LinearClassifier& clf, const Mat& features);

// Argmax with ties to the lowest index.
int predict(const std::vector<double>& p);
int predict_row(const double* p, std::size_t n);

// Argmax of the elementwise mean of M distributions. Throws length_mismatch.
int ensemble_predict(const std::vector<std::vector<double>>& dists);

struct EpisodeResult {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;  // [truth][predicted]
};

// One episode: per member embed the train split, fit LR, average the test
// probabilities across members, score.
EpisodeResult run_episode(const std::vector<const EmbeddingModel*>& members,
                          const LabeledDataset& pool, const FewShotSplit& split,
                          const FewShotConfig& cfg);

struct MonteCarloStats {
    double mean = 0.0, median = 0.0, lower_quartile = 0.0, upper_quartile = 0.0;
    double min = 0.0, max = 0.0;
    std::vector<double> per_trial;
};

// `trials` episodes with independent per-trial substreams; trials may run in
// parallel, results reduce in trial order.
MonteCarloStats monte_carlo(const std::vector<const EmbeddingModel*>& members,
                            const LabeledDataset& pool, const FewShotConfig& cfg);

// Box-plot quantities of a sample: median and Tukey-hinge quartiles
// (median of each half, halves excluding the middle element for odd n).
MonteCarloStats summarize_trials(const std::vector<double>& per_trial);

}  // namespace cvsei
