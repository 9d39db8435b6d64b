#pragma once

#include <cstdint>
#include <vector>

#include "cvsei/layers.hpp"
#include "cvsei/signal.hpp"
#include "cvsei/tensor.hpp"

namespace cvsei {

struct ModelShape {
    std::size_t depth = 9;
    std::size_t n_ne = 64;       // conv neurons per layer (Table-scale 64, desk runs use 16)
    std::size_t ksize = 3;
    std::size_t input_len = 512;
    std::size_t feat_dim = 1024;
    std::size_t class_count = 0; // auxiliary classes
    double dropout_rate = 0.5;
};

// The full learnable state: depth x (conv + CVBN) stacks, the dense head,
// and the per-class center features used by the center loss.
struct EmbeddingModel {
    ModelShape shape;
    std::vector<ConvLayerParams> conv;  // [depth]
    std::vector<CvbnParams> bn;         // [depth]
    DenseHeadParams head;
    Mat centers;                        // [class_count x feat_dim]

    // Sequence length entering each stage; stage_len[depth] feeds the head.
    std::vector<std::size_t> stage_len;
};

// Gaussian conv kernels (std 1/sqrt(2*N_in*N_ke) per part), gamma = I/sqrt(2),
// Glorot-uniform dense/classifier, zero biases and centers. All values are
// f32-representable so checkpoints round-trip exactly.
EmbeddingModel init_embedding_model(const ModelShape& shape, std::uint64_t seed);

// Rounds every parameter (and running stat) to its nearest f32 value.
void snap_model_f32(EmbeddingModel& m);

struct ModelGrads {
    std::vector<ConvGrads> conv;
    std::vector<CvbnGrads> bn;
    HeadGrads head;
};

// Everything the backward pass reuses from one batch forward.
struct LayerTrace {
    std::vector<CxTensor> conv_out;  // CVReLU input
    std::vector<CxTensor> relu_out;  // CVBN input
    std::vector<CxTensor> pool_out;  // next stage input
    std::vector<std::vector<std::uint32_t>> pool_idx;
    CvbnCache bn;
};

struct ForwardTrace {
    std::vector<CxTensor> input;
    std::vector<LayerTrace> layers;
    std::vector<HeadCache> head;
};

struct BatchForward {
    Mat features;  // [B x feat_dim]
    Mat logits;    // [B x class_count]
};

CxTensor signal_to_tensor(const ComplexSignal& sig);

// Full forward over a batch. In train mode dropout masks come from `rng`
// (two uniforms per feature slot in fixed sample order) and `trace` collects
// the per-layer caches plus pending CVBN running-stat updates; the model is
// never mutated here (commit_bn_updates applies them).
BatchForward forward_batch(const EmbeddingModel& model, const std::vector<CxTensor>& batch,
                           Mode mode, Rng* rng = nullptr, ForwardTrace* trace = nullptr,
                           MacCounter* macs = nullptr);

void commit_bn_updates(EmbeddingModel& model, const ForwardTrace& trace);

// Backward from loss gradients on features and logits; returns parameter
// gradients summed over the batch (fixed sample order). When input_grads is
// non-null the per-sample input gradients are stored there too.
ModelGrads backward_batch(const EmbeddingModel& model, const ForwardTrace& trace,
                          const Mat& grad_features, const Mat& grad_logits,
                          std::vector<CxTensor>* input_grads = nullptr);

// Applies one plain SGD step: W <- W - eta * grad for every parameter tensor.
void sgd_step(EmbeddingModel& model, const ModelGrads& grads, double eta);

// Feature embedding only (no logits), per the two-stage deployment: eval
// mode, deterministic.
Mat embed(const EmbeddingModel& model, const std::vector<const ComplexSignal*>& batch,
          Mode mode = Mode::eval, Rng* rng = nullptr);
Mat embed_dataset(const EmbeddingModel& model, const LabeledDataset& data,
                  const std::vector<std::size_t>& indices);

}  // namespace cvsei
