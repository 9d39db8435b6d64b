#include "cvsei/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvsei/errors.hpp"
#include "cvsei/parallel.hpp"

namespace cvsei {

SilhouetteReport silhouette(const Mat& features, const std::vector<int>& labels) {
    const std::size_t n = features.rows, d = features.cols;
    require(labels.size() == n, Errc::length_mismatch, "silhouette: size mismatch");
    require(n >= 2, Errc::insufficient_data, "silhouette needs at least 2 samples");

    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    std::vector<std::size_t> class_sizes(static_cast<std::size_t>(max_label) + 1, 0);
    for (int y : labels) {
        require(y >= 0, Errc::label_out_of_range, "silhouette: negative label");
        ++class_sizes[static_cast<std::size_t>(y)];
    }
    std::size_t classes = 0;
    for (std::size_t c = 0; c < class_sizes.size(); ++c) {
        if (class_sizes[c] == 0) continue;
        ++classes;
        require(class_sizes[c] >= 2, Errc::singleton_class,
                "silhouette: class " + std::to_string(c) + " has a single sample");
    }
    require(classes >= 2, Errc::too_few_classes, "silhouette needs at least 2 classes");

    // Full distance matrix in 64-bit; rows are independent afterwards.
    Mat dist(n, n);
    parallel_for(n, [&](std::size_t i) {
        const double* fi = features.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* fj = features.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = fi[k] - fj[k];
                s += diff * diff;
            }
            dist.at(i, j) = std::sqrt(s);
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) dist.at(i, j) = dist.at(j, i);

    SilhouetteReport rep;
    rep.per_sample_s.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double intra_sum = 0.0;
        std::size_t intra_cnt = 0;
        double inter_min = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            if (labels[k] == labels[j]) {
                intra_sum += dist.at(j, k);
                ++intra_cnt;
            } else {
                inter_min = std::min(inter_min, dist.at(j, k));
            }
        }
        const double intra = intra_sum / static_cast<double>(intra_cnt);
        const double denom = std::max(inter_min, intra);
        rep.per_sample_s[j] = denom == 0.0 ? 0.0 : (inter_min - intra) / denom;
    }
    double sum = 0.0;
    for (double s : rep.per_sample_s) sum += s;
    rep.sc = sum / static_cast<double>(n);
    return rep;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    require(predicted.size() == truth.size(), Errc::length_mismatch, "accuracy: size mismatch");
    require(!predicted.empty(), Errc::insufficient_data, "accuracy: empty lists");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

std::vector<std::vector<int>> confusion(const std::vector<int>& predicted,
                                        const std::vector<int>& truth, int class_count) {
    require(predicted.size() == truth.size(), Errc::length_mismatch, "confusion: size mismatch");
    std::vector<std::vector<int>> m(static_cast<std::size_t>(class_count),
                                    std::vector<int>(static_cast<std::size_t>(class_count), 0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        require(truth[i] >= 0 && truth[i] < class_count && predicted[i] >= 0 &&
                    predicted[i] < class_count,
                Errc::label_out_of_range, "confusion: label out of range");
        m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])]++;
    }
    return m;
}

namespace {

constexpr int kPowerIters = 200;

// Dominant eigenpair of the centered data's covariance, matrix-free:
// v <- Xc^T (Xc v) / N, optionally deflated against a previous direction.
double power_component(const Mat& centered, const std::vector<double>* deflate,
                       std::vector<double>& v) {
    const std::size_t n = centered.rows, d = centered.cols;
    // Deterministic start: unit-norm ramp (breaks symmetric starts).
    for (std::size_t k = 0; k < d; ++k) v[k] = 1.0 + 1e-3 * static_cast<double>(k);

    std::vector<double> proj(n), next(d);
    double eigen = 0.0;
    for (int iter = 0; iter < kPowerIters; ++iter) {
        if (deflate) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += v[k] * (*deflate)[k];
            for (std::size_t k = 0; k < d; ++k) v[k] -= dot * (*deflate)[k];
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) norm += v[k] * v[k];
        norm = std::sqrt(norm);
        if (norm == 0.0) fail(Errc::degenerate_data, "pca: zero vector during power iteration");
        for (std::size_t k = 0; k < d; ++k) v[k] /= norm;

        for (std::size_t i = 0; i < n; ++i) {
            const double* r = centered.row(i);
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += r[k] * v[k];
            proj[i] = s;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = centered.row(i);
            const double pi_ = proj[i];
            for (std::size_t k = 0; k < d; ++k) next[k] += pi_ * r[k];
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        eigen = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            next[k] *= inv_n;
            eigen += next[k] * v[k];  // Rayleigh quotient with unit v
        }
        v = next;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (auto& x : v) x /= norm;
    return eigen;
}

}  // namespace

PcaResult pca_project(const Mat& features) {
    const std::size_t n = features.rows, d = features.cols;
    require(n >= 3, Errc::shape_mismatch, "pca_project needs at least 3 samples");
    require(d >= 2, Errc::shape_mismatch, "pca_project needs at least 2 dimensions");

    Mat centered = features;
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = features.row(i);
        for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    double total_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* r = centered.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            r[k] -= mean[k];
            total_var += r[k] * r[k];
        }
    }
    require(total_var > 0.0, Errc::degenerate_data, "pca_project: zero total variance");

    PcaResult res;
    std::vector<double> v1(d), v2(d);
    res.eigenvalues[0] = power_component(centered, nullptr, v1);
    res.eigenvalues[1] = power_component(centered, &v1, v2);

    res.projected = Mat(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = centered.row(i);
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            a += r[k] * v1[k];
            b += r[k] * v2[k];
        }
        res.projected.at(i, 0) = a;
        res.projected.at(i, 1) = b;
    }
    return res;
}

}  // namespace cvsei
