#pragma once

#include <vector>

#include "cvsei/tensor.hpp"

namespace cvsei {

struct SilhouetteReport {
    double sc = 0.0;                   // mean of per_sample_s
    std::vector<double> per_sample_s;  // each in [-1, 1]
};

// Silhouette with the min-based inter distance: per sample, D_intra is the
// mean L2 distance to same-class others and D_inter the MINIMUM L2 distance
// to any different-class sample (not the usual nearest-cluster mean);
// s = (D_inter - D_intra) / max(D_inter, D_intra), 0 when both are 0.
// Throws too_few_classes / singleton_class.
SilhouetteReport silhouette(const Mat& features, const std::vector<int>& labels);

// Fraction of matching entries. Throws length_mismatch.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

// confusion[i][j] = count of truth i predicted j.
std::vector<std::vector<int>> confusion(const std::vector<int>& predicted,
                                        const std::vector<int>& truth, int class_count);

struct PcaResult {
    Mat projected;                  // [N x 2], axis-0 variance >= axis-1 variance
    double eigenvalues[2] = {0, 0};
};

// Centers the rows and projects onto the top two principal directions (power
// iteration with deflation, fixed 200 iterations, deterministic start).
// Throws degenerate_data when total variance is 0, shape_mismatch for N < 3.
PcaResult pca_project(const Mat& features);

}  // namespace cvsei
