#include "cvsei/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cvsei/errors.hpp"

namespace cvsei {

SoftmaxCeResult softmax_ce(const Mat& logits, const std::vector<int>& labels) {
    const std::size_t B = logits.rows, C = logits.cols;
    require(labels.size() == B, Errc::length_mismatch, "softmax_ce: batch size mismatch");

    SoftmaxCeResult res;
    res.grad_logits = Mat(B, C);
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < C,
                Errc::label_out_of_range, "softmax_ce: label out of range");
        const double* z = logits.row(i);
        const double zmax = *std::max_element(z, z + C);
        double denom = 0.0;
        for (std::size_t k = 0; k < C; ++k) denom += std::exp(z[k] - zmax);
        const double log_denom = std::log(denom);
        loss += log_denom - (z[static_cast<std::size_t>(labels[i])] - zmax);
        double* g = res.grad_logits.row(i);
        for (std::size_t k = 0; k < C; ++k)
            g[k] = std::exp(z[k] - zmax) / denom / static_cast<double>(B);
        g[static_cast<std::size_t>(labels[i])] -= 1.0 / static_cast<double>(B);
    }
    res.loss = loss / static_cast<double>(B);
    return res;
}

namespace {

double l2_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

}  // namespace

TripletResult triplet_loss(const std::vector<double>& fa, const std::vector<double>& fp,
                           const std::vector<double>& fn, double margin) {
    const std::size_t d = fa.size();
    require(fp.size() == d && fn.size() == d, Errc::length_mismatch,
            "triplet_loss: dimension mismatch");

    TripletResult res;
    res.grad_anchor.assign(d, 0.0);
    res.grad_pos.assign(d, 0.0);
    res.grad_neg.assign(d, 0.0);

    const double dp = l2_dist(fp.data(), fa.data(), d);
    const double dn = l2_dist(fn.data(), fa.data(), d);
    const double val = dp - dn + margin;
    if (val <= 0.0) return res;  // inactive: subgradient 0
    res.loss = val;

    // d||u||/du = u/||u||, taken as 0 at u = 0.
    if (dp > 0.0) {
        for (std::size_t i = 0; i < d; ++i) {
            const double u = (fp[i] - fa[i]) / dp;
            res.grad_pos[i] += u;
            res.grad_anchor[i] -= u;
        }
    }
    if (dn > 0.0) {
        for (std::size_t i = 0; i < d; ++i) {
            const double u = (fn[i] - fa[i]) / dn;
            res.grad_neg[i] -= u;
            res.grad_anchor[i] += u;
        }
    }
    return res;
}

TripletBatchResult triplet_loss_batch(const Mat& features, const std::vector<Triplet>& triplets,
                                      double margin) {
    TripletBatchResult res;
    res.grad_features = Mat(features.rows, features.cols);
    if (triplets.empty()) return res;

    const std::size_t d = features.cols;
    const double inv_m = 1.0 / static_cast<double>(triplets.size());
    for (const auto& tr : triplets) {
        const double* fa = features.row(tr.anchor);
        const double* fp = features.row(tr.pos);
        const double* fn = features.row(tr.neg);
        const double dp = l2_dist(fp, fa, d);
        const double dn = l2_dist(fn, fa, d);
        const double val = dp - dn + margin;
        if (val <= 0.0) continue;
        res.loss += val;
        double* ga = res.grad_features.row(tr.anchor);
        double* gp = res.grad_features.row(tr.pos);
        double* gn = res.grad_features.row(tr.neg);
        if (dp > 0.0) {
            for (std::size_t i = 0; i < d; ++i) {
                const double u = (fp[i] - fa[i]) / dp * inv_m;
                gp[i] += u;
                ga[i] -= u;
            }
        }
        if (dn > 0.0) {
            for (std::size_t i = 0; i < d; ++i) {
                const double u = (fn[i] - fa[i]) / dn * inv_m;
                gn[i] -= u;
                ga[i] += u;
            }
        }
    }
    res.loss *= inv_m;
    return res;
}

CenterResult center_loss(const Mat& features, const std::vector<int>& labels,
                         const Mat& centers) {
    const std::size_t B = features.rows, d = features.cols;
    require(labels.size() == B, Errc::length_mismatch, "center_loss: batch size mismatch");
    require(centers.cols == d, Errc::shape_mismatch, "center_loss: feature dim mismatch");

    CenterResult res;
    res.grad_features = Mat(B, d);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i) {
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < centers.rows,
                Errc::label_out_of_range, "center_loss: label indexes no center row");
        const double* f = features.row(i);
        const double* c = centers.row(static_cast<std::size_t>(labels[i]));
        double* g = res.grad_features.row(i);
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = f[k] - c[k];
            sq += diff * diff;
            g[k] = diff * inv_b;
        }
        res.loss += 0.5 * sq;
    }
    res.loss *= inv_b;
    return res;
}

double hybrid_combine(double softmax_part, double triplet_part, double center_part,
                      const LossConfig& cfg) {
    double contrastive = 0.0;
    if (cfg.use_triplet) contrastive += triplet_part;
    if (cfg.use_center) contrastive += center_part;
    return softmax_part + cfg.lambda * contrastive;
}

HybridResult hybrid_loss(const Mat& logits, const Mat& features, const std::vector<int>& labels,
                         const std::vector<Triplet>& triplets, const Mat& centers,
                         const LossConfig& cfg) {
    HybridResult res;
    SoftmaxCeResult sm = softmax_ce(logits, labels);
    res.softmax_part = sm.loss;
    res.grad_logits = std::move(sm.grad_logits);
    res.grad_features = Mat(features.rows, features.cols);

    if (cfg.use_triplet) {
        TripletBatchResult tr = triplet_loss_batch(features, triplets, cfg.margin);
        res.triplet_part = tr.loss;
        for (std::size_t k = 0; k < res.grad_features.v.size(); ++k)
            res.grad_features.v[k] += cfg.lambda * tr.grad_features.v[k];
    }
    if (cfg.use_center) {
        CenterResult ce = center_loss(features, labels, centers);
        res.center_part = ce.loss;
        for (std::size_t k = 0; k < res.grad_features.v.size(); ++k)
            res.grad_features.v[k] += cfg.lambda * ce.grad_features.v[k];
    }
    res.loss = hybrid_combine(res.softmax_part, res.triplet_part, res.center_part, cfg);
    return res;
}

}  // namespace cvsei
