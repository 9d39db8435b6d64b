#include "cvsei/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvsei/errors.hpp"
#include "cvsei/losses.hpp"
#include "cvsei/parallel.hpp"

namespace cvsei {

FewShotSplit split_fewshot(const LabeledDataset& pool, const FewShotConfig& cfg, Rng& rng) {
    require(cfg.ways >= 2 && cfg.shots >= 1 && cfg.test_per_class >= 1, Errc::invalid_config,
            "episode needs ways >= 2, shots >= 1, test_per_class >= 1");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(pool.class_count));
    for (std::size_t i = 0; i < pool.labels.size(); ++i)
        by_class[static_cast<std::size_t>(pool.labels[i])].push_back(i);

    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() >= static_cast<std::size_t>(cfg.shots + cfg.test_per_class))
            eligible.push_back(c);
    require(eligible.size() >= static_cast<std::size_t>(cfg.ways), Errc::insufficient_data,
            "pool has " + std::to_string(eligible.size()) + " usable classes, episode needs " +
                std::to_string(cfg.ways));

    rng.shuffle(eligible);
    FewShotSplit split;
    for (int c = 0; c < cfg.ways; ++c) {
        const std::size_t cls = eligible[static_cast<std::size_t>(c)];
        split.chosen_classes.push_back(static_cast<int>(cls));
        auto samples = by_class[cls];
        rng.shuffle(samples);
        for (int k = 0; k < cfg.shots; ++k) {
            split.train_idx.push_back(samples[static_cast<std::size_t>(k)]);
            split.train_labels.push_back(c);
        }
        for (int k = 0; k < cfg.test_per_class; ++k) {
            split.test_idx.push_back(samples[static_cast<std::size_t>(cfg.shots + k)]);
            split.test_labels.push_back(c);
        }
    }
    return split;
}

namespace {

double lr_objective(const Mat& features, const std::vector<int>& labels,
                    const LinearClassifier& clf, double reg, Mat* grad_w,
                    std::vector<double>* grad_b) {
    const std::size_t n = features.rows, d = features.cols, c = clf.bias.size();
    if (grad_w) *grad_w = Mat(d, c);
    if (grad_b) grad_b->assign(c, 0.0);

    double nll = 0.0;
    std::vector<double> z(c);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* f = features.row(i);
        for (std::size_t k = 0; k < c; ++k) z[k] = clf.bias[k];
        for (std::size_t j = 0; j < d; ++j) {
            const double fj = f[j];
            if (fj == 0.0) continue;
            const double* w = clf.weight.row(j);
            for (std::size_t k = 0; k < c; ++k) z[k] += fj * w[k];
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (std::size_t k = 0; k < c; ++k) denom += std::exp(z[k] - zmax);
        const auto y = static_cast<std::size_t>(labels[i]);
        nll += std::log(denom) - (z[y] - zmax);
        if (grad_w || grad_b) {
            for (std::size_t k = 0; k < c; ++k) {
                double p = std::exp(z[k] - zmax) / denom;
                if (k == y) p -= 1.0;
                p *= inv_n;
                if (grad_b) (*grad_b)[k] += p;
                if (grad_w)
                    for (std::size_t j = 0; j < d; ++j) grad_w->at(j, k) += p * f[j];
            }
        }
    }
    nll *= inv_n;

    double reg_term = 0.0;
    for (std::size_t j = 0; j < clf.weight.size(); ++j) {
        reg_term += clf.weight.v[j] * clf.weight.v[j];
        if (grad_w) grad_w->v[j] += reg * clf.weight.v[j];
    }
    return nll + 0.5 * reg * reg_term;
}

}  // namespace

LinearClassifier fit_lr(const Mat& features, const std::vector<int>& labels, int classes,
                        double reg, int iters, double step, std::vector<double>* objective_trace) {
    require(features.rows == labels.size(), Errc::length_mismatch, "fit_lr: size mismatch");
    require(features.rows >= static_cast<std::size_t>(classes), Errc::insufficient_data,
            "fit_lr: fewer samples than classes");
    for (int y : labels)
        require(y >= 0 && y < classes, Errc::label_out_of_range, "fit_lr: label out of range");

    LinearClassifier clf;
    clf.weight = Mat(features.cols, static_cast<std::size_t>(classes));
    clf.bias.assign(static_cast<std::size_t>(classes), 0.0);

    Mat gw;
    std::vector<double> gb;
    for (int it = 0; it < iters; ++it) {
        const double obj = lr_objective(features, labels, clf, reg, &gw, &gb);
        if (!std::isfinite(obj))
            fail(Errc::non_finite_loss, "fit_lr: non-finite objective at iteration " +
                                            std::to_string(it));
        if (objective_trace) objective_trace->push_back(obj);
        for (std::size_t j = 0; j < clf.weight.size(); ++j) clf.weight.v[j] -= step * gw.v[j];
        for (std::size_t k = 0; k < clf.bias.size(); ++k) clf.bias[k] -= step * gb[k];
    }
    return clf;
}

Mat predict_proba(const LinearClassifier& clf, const Mat& features) {
    const std::size_t n = features.rows, d = features.cols, c = clf.bias.size();
    require(clf.weight.rows == d, Errc::shape_mismatch, "predict_proba: feature dim mismatch");
    Mat probs(n, c);
    std::vector<double> z(c);
    for (std::size_t i = 0; i < n; ++i) {
        const double* f = features.row(i);
        for (std::size_t k = 0; k < c; ++k) z[k] = clf.bias[k];
        for (std::size_t j = 0; j < d; ++j) {
            const double fj = f[j];
            if (fj == 0.0) continue;
            const double* w = clf.weight.row(j);
            for (std::size_t k = 0; k < c; ++k) z[k] += fj * w[k];
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (std::size_t k = 0; k < c; ++k) denom += std::exp(z[k] - zmax);
        double* p = probs.row(i);
        for (std::size_t k = 0; k < c; ++k) p[k] = std::exp(z[k] - zmax) / denom;
    }
    return probs;
}

int predict_row(const double* p, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (p[k] > p[best]) best = k;  // strict: ties keep the lowest index
    return static_cast<int>(best);
}

int predict(const std::vector<double>& p) { return predict_row(p.data(), p.size()); }

int ensemble_predict(const std::vector<std::vector<double>>& dists) {
    require(!dists.empty(), Errc::length_mismatch, "ensemble_predict: no distributions");
    const std::size_t c = dists.front().size();
    std::vector<double> mean(c, 0.0);
    for (const auto& p : dists) {
        require(p.size() == c, Errc::length_mismatch, "ensemble_predict: length mismatch");
        for (std::size_t k = 0; k < c; ++k) mean[k] += p[k];
    }
    const double inv_m = 1.0 / static_cast<double>(dists.size());
    for (auto& x : mean) x *= inv_m;
    return predict(mean);
}

EpisodeResult run_episode(const std::vector<const EmbeddingModel*>& members,
                          const LabeledDataset& pool, const FewShotSplit& split,
                          const FewShotConfig& cfg) {
    require(!members.empty(), Errc::invalid_config, "episode needs at least one member");
    const std::size_t feat_dim = members.front()->shape.feat_dim;
    for (const auto* m : members)
        require(m->shape.feat_dim == feat_dim, Errc::shape_mismatch,
                "ensemble members must share the feature dimension");

    const std::size_t n_te = split.test_idx.size();
    const auto ways = static_cast<std::size_t>(cfg.ways);
    Mat prob_sum(n_te, ways);
    for (const auto* member : members) {
        Mat f_tr = embed_dataset(*member, pool, split.train_idx);
        LinearClassifier clf =
            fit_lr(f_tr, split.train_labels, cfg.ways, cfg.lr_reg, cfg.lr_iters, cfg.lr_step);
        Mat f_te = embed_dataset(*member, pool, split.test_idx);
        Mat probs = predict_proba(clf, f_te);
        for (std::size_t k = 0; k < prob_sum.size(); ++k) prob_sum.v[k] += probs.v[k];
    }
    // Argmax of the mean = argmax of the sum; divide anyway so the stored
    // distributions stay normalized.
    const double inv_m = 1.0 / static_cast<double>(members.size());
    for (auto& x : prob_sum.v) x *= inv_m;

    EpisodeResult res;
    res.confusion.assign(ways, std::vector<int>(ways, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_te; ++i) {
        const int pred = predict_row(prob_sum.row(i), ways);
        const int truth = split.test_labels[i];
        res.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)]++;
        correct += pred == truth;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(n_te);
    return res;
}

MonteCarloStats summarize_trials(const std::vector<double>& per_trial) {
    require(!per_trial.empty(), Errc::insufficient_data, "no trials to summarize");
    MonteCarloStats s;
    s.per_trial = per_trial;
    const std::size_t n = per_trial.size();

    double sum = 0.0;
    for (double x : per_trial) sum += x;
    s.mean = sum / static_cast<double>(n);

    // Selection via nth_element; the test oracle uses a full sort instead.
    std::vector<double> v = per_trial;
    auto kth = [&](std::size_t k) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        return v[k];
    };
    auto median_of_range = [&](std::size_t lo, std::size_t len) {
        if (len % 2 == 1) return kth(lo + len / 2);
        const double a = kth(lo + len / 2 - 1);
        const double b = kth(lo + len / 2);
        return 0.5 * (a + b);
    };
    s.median = median_of_range(0, n);
    const std::size_t half = n / 2;
    s.lower_quartile = n == 1 ? s.median : median_of_range(0, half);
    s.upper_quartile = n == 1 ? s.median : median_of_range(n - half, half);
    s.min = kth(0);
    s.max = kth(n - 1);
    return s;
}

MonteCarloStats monte_carlo(const std::vector<const EmbeddingModel*>& members,
                            const LabeledDataset& pool, const FewShotConfig& cfg) {
    require(cfg.trials >= 1, Errc::invalid_config, "monte_carlo: trials must be >= 1");
    std::vector<double> per_trial(static_cast<std::size_t>(cfg.trials), 0.0);
    parallel_for(per_trial.size(), [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, stream::episode, t));
        FewShotSplit split = split_fewshot(pool, cfg, rng);
        per_trial[t] = run_episode(members, pool, split, cfg).accuracy;
    });
    return summarize_trials(per_trial);
}

}  // namespace cvsei
