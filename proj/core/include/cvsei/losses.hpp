#pragma once

#include <vector>

#include "cvsei/tensor.hpp"

namespace cvsei {

// Loss mixing switches: lambda weights the contrastive terms, the flags pick
// the ablation variant (Softmax-only, ST, SC, STC).
struct LossConfig {
    double lambda = 0.01;
    double margin = 5.0;
    bool use_triplet = true;
    bool use_center = true;
};

struct SoftmaxCeResult {
    double loss = 0.0;
    Mat grad_logits;  // (softmax - onehot) / B
};

// Mean cross-entropy of softmax(logits) against integer labels,
// max-stabilized. Throws label_out_of_range.
SoftmaxCeResult softmax_ce(const Mat& logits, const std::vector<int>& labels);

struct TripletResult {
    double loss = 0.0;
    std::vector<double> grad_anchor, grad_pos, grad_neg;
};

// max(||f+ - fa|| - ||f- - fa|| + margin, 0) with unsquared Euclidean norms;
// subgradient 0 when inactive and at zero distances.
TripletResult triplet_loss(const std::vector<double>& f_anchor, const std::vector<double>& f_pos,
                           const std::vector<double>& f_neg, double margin);

struct Triplet {
    std::size_t anchor, pos, neg;
};

struct TripletBatchResult {
    double loss = 0.0;       // mean over triplets
    Mat grad_features;       // [B x d], contributions scattered to a/p/n rows
};

TripletBatchResult triplet_loss_batch(const Mat& features, const std::vector<Triplet>& triplets,
                                      double margin);

struct CenterResult {
    double loss = 0.0;
    Mat grad_features;  // (f - c_y) / B; center updates live in the trainer
};

CenterResult center_loss(const Mat& features, const std::vector<int>& labels, const Mat& centers);

struct HybridResult {
    double loss = 0.0;
    double softmax_part = 0.0;
    double triplet_part = 0.0;  // raw component values, pre-lambda
    double center_part = 0.0;
    Mat grad_logits;
    Mat grad_features;
};

// L = L_softmax + lambda * (triplet if enabled) + lambda * (center if enabled).
double hybrid_combine(double softmax_part, double triplet_part, double center_part,
                      const LossConfig& cfg);

HybridResult hybrid_loss(const Mat& logits, const Mat& features, const std::vector<int>& labels,
                         const std::vector<Triplet>& triplets, const Mat& centers,
                         const LossConfig& cfg);

}  // namespace cvsei
