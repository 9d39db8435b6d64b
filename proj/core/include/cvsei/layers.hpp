#pragma once

#include <cstdint>
#include <vector>

#include "cvsei/rng.hpp"
#include "cvsei/tensor.hpp"

namespace cvsei {

enum class Mode { train, eval };
enum class Padding { same, valid };

// Counts real multiply-accumulates actually executed by the convolution
// loops; one complex conv layer performs 4*N_ke*N_out*N_in*N_ne of them.
struct MacCounter {
    std::uint64_t real_macs = 0;
};

// ---------------------------------------------------------------------------
// Complex-valued 1-D convolution (cross-correlation orientation, stride 1)

struct ConvLayerParams {
    std::size_t out_ch = 0;  // N_ne
    std::size_t in_ch = 0;   // N_in
    std::size_t ksize = 0;   // N_ke
    Padding padding = Padding::same;
    std::vector<cxd> kernels;  // [out_ch][in_ch][ksize]
    std::vector<cxd> biases;   // [out_ch]

    ConvLayerParams() = default;
    ConvLayerParams(std::size_t out, std::size_t in, std::size_t k, Padding pad = Padding::same)
        : out_ch(out), in_ch(in), ksize(k), padding(pad), kernels(out * in * k), biases(out) {}

    cxd& kernel(std::size_t m, std::size_t n, std::size_t k) {
        return kernels[(m * in_ch + n) * ksize + k];
    }
    const cxd& kernel(std::size_t m, std::size_t n, std::size_t k) const {
        return kernels[(m * in_ch + n) * ksize + k];
    }
    std::size_t out_len(std::size_t in_len) const {
        return padding == Padding::same ? in_len : in_len - ksize + 1;
    }
};

struct ConvGrads {
    std::vector<cxd> kernels;
    std::vector<cxd> biases;
};

// out[t,m] = sum_n sum_k W[m,n,k] * in[t+k-pad, n] + b[m], evaluated as the
// four real convolutions (Re W*Re I - Im W*Im I) + j(Im W*Re I + Re W*Im I).
CxTensor cvconv1d_forward(const CxTensor& input, const ConvLayerParams& p,
                          MacCounter* macs = nullptr);

// Exact gradients treating every complex tensor as its real/imaginary pair.
CxTensor cvconv1d_backward(const CxTensor& upstream, const CxTensor& cached_input,
                           const ConvLayerParams& p, ConvGrads& grads);

// ---------------------------------------------------------------------------
// CVReLU: max(Re,0) + j*max(Im,0), elementwise

CxTensor cvrelu(const CxTensor& input);
CxTensor cvrelu_backward(const CxTensor& upstream, const CxTensor& cached_input);

// ---------------------------------------------------------------------------
// Complex batch normalization: per channel the (Re,Im) pairs are whitened by
// the inverse square root of their 2x2 covariance (+ eps*I), then scaled by a
// learnable 2x2 gamma and shifted by a 2-vector beta.

struct CvbnParams {
    std::size_t ch = 0;
    std::vector<double> gamma;         // [ch][4]: rr, ri, ir, ii
    std::vector<double> beta;          // [ch][2]
    std::vector<double> running_mean;  // [ch][2]
    std::vector<double> running_cov;   // [ch][4]: rr, ri, ir, ii (symmetric)
    double epsilon = 1e-5;
    double momentum = 0.9;

    CvbnParams() = default;
    explicit CvbnParams(std::size_t channels)
        : ch(channels),
          gamma(channels * 4, 0.0),
          beta(channels * 2, 0.0),
          running_mean(channels * 2, 0.0),
          running_cov(channels * 4, 0.0) {
        for (std::size_t c = 0; c < channels; ++c) {
            gamma[c * 4 + 0] = gamma[c * 4 + 3] = 1.0;
            running_cov[c * 4 + 0] = running_cov[c * 4 + 3] = 0.5;
        }
    }
};

struct CvbnCache {
    // Per channel: statistics the backward pass reuses. In train mode these
    // are batch statistics; in eval mode the running ones.
    std::vector<double> mu;       // [ch][2]
    std::vector<double> m_cov;    // [ch][3]: a, b, c entries of cov + eps*I
    std::vector<double> inv_sqrt; // [ch][3]: symmetric A = M^(-1/2)
    std::size_t population = 0;   // batch x length
    Mode mode = Mode::eval;
    // New running stats computed in train mode; the caller decides when to
    // commit them (keeps forward side-effect free for finite-difference work).
    std::vector<double> new_running_mean;  // [ch][2]
    std::vector<double> new_running_cov;   // [ch][4]
};

struct CvbnGrads {
    std::vector<double> gamma;  // [ch][4]
    std::vector<double> beta;   // [ch][2]
};

// Batch form: statistics pool over batch x length per channel.
// Throws degenerate_batch when the train-mode population is < 2.
std::vector<CxTensor> cvbn_forward(const std::vector<CxTensor>& batch, const CvbnParams& p,
                                   Mode mode, CvbnCache* cache = nullptr);

// Single-tensor convenience wrapper (a batch of one).
CxTensor cvbn_forward_one(const CxTensor& input, const CvbnParams& p, Mode mode,
                          CvbnCache* cache = nullptr);

std::vector<CxTensor> cvbn_backward(const std::vector<CxTensor>& upstream,
                                    const std::vector<CxTensor>& cached_input,
                                    const CvbnParams& p, const CvbnCache& cache,
                                    CvbnGrads& grads);

void cvbn_commit_running(CvbnParams& p, const CvbnCache& cache);

// ---------------------------------------------------------------------------
// Modulus max-pooling, window 2: keeps the complex element with the larger
// |.| in each window (ties go to the earlier index), preserving its phase.

CxTensor magnitude_maxpool(const CxTensor& input, std::vector<std::uint32_t>* indices = nullptr);
CxTensor magnitude_maxpool_backward(const CxTensor& upstream,
                                    const std::vector<std::uint32_t>& indices,
                                    std::size_t input_len, std::size_t ch);

// ---------------------------------------------------------------------------
// Flatten + dense head. The complex tensor is flattened to all real parts
// (row-major) followed by all imaginary parts; that ordering is fixed so
// checkpoints stay valid.

struct DenseHeadParams {
    std::size_t flat_dim = 0;
    std::size_t feat_dim = 0;
    std::size_t class_count = 0;
    double dropout_rate = 0.5;
    Mat dense_weight;                    // [flat_dim x feat_dim]
    std::vector<double> dense_bias;      // [feat_dim]
    Mat classifier_weight;               // [feat_dim x class_count]
    std::vector<double> classifier_bias; // [class_count]

    DenseHeadParams() = default;
    DenseHeadParams(std::size_t flat, std::size_t feat, std::size_t classes)
        : flat_dim(flat),
          feat_dim(feat),
          class_count(classes),
          dense_weight(flat, feat),
          dense_bias(feat, 0.0),
          classifier_weight(feat, classes),
          classifier_bias(classes, 0.0) {}
};

struct HeadCache {
    std::vector<double> flat;      // flattened input
    std::vector<double> pre_relu;  // dense affine output
    std::vector<double> mask;      // inverted-dropout multipliers (train only)
    std::vector<double> feature;   // returned feature (post-dropout in train)
};

struct HeadOut {
    std::vector<double> feature;
    std::vector<double> logits;
};

struct HeadGrads {
    Mat dense_weight;
    std::vector<double> dense_bias;
    Mat classifier_weight;
    std::vector<double> classifier_bias;
};

// Train mode applies inverted dropout driven by `rng` and computes logits
// from the post-dropout feature; eval mode is deterministic.
HeadOut flatten_and_head(const CxTensor& input, const DenseHeadParams& head, Mode mode,
                         Rng* rng = nullptr, HeadCache* cache = nullptr);

// grad_feature is the loss gradient on the returned feature; grad_logits on
// the logits. Returns the gradient on the [in_len x in_ch] complex input.
CxTensor head_backward(const std::vector<double>& grad_feature,
                       const std::vector<double>& grad_logits, const HeadCache& cache,
                       const DenseHeadParams& head, std::size_t in_len, std::size_t in_ch,
                       HeadGrads& grads);

std::vector<double> flatten_complex(const CxTensor& input);

}  // namespace cvsei
