#include "cvsei/model.hpp"

#include <cmath>

#include "cvsei/errors.hpp"
#include "cvsei/parallel.hpp"

namespace cvsei {

namespace {

double snap(double x) { return static_cast<double>(static_cast<float>(x)); }

void snap_vec(std::vector<double>& v) {
    for (auto& x : v) x = snap(x);
}

void snap_cvec(std::vector<cxd>& v) {
    for (auto& x : v) x = {snap(x.real()), snap(x.imag())};
}

}  // namespace

EmbeddingModel init_embedding_model(const ModelShape& shape, std::uint64_t seed) {
    require(shape.depth >= 1 && shape.n_ne >= 1 && shape.class_count >= 1, Errc::invalid_config,
            "model shape: depth, n_ne and class_count must be positive");
    require(shape.input_len >= (std::size_t{1} << shape.depth), Errc::shape_mismatch,
            "input length " + std::to_string(shape.input_len) + " too short for " +
                std::to_string(shape.depth) + " pooling stages");

    EmbeddingModel m;
    m.shape = shape;
    Rng rng(derive_seed(seed, stream::model_init));

    m.stage_len.resize(shape.depth + 1);
    m.stage_len[0] = shape.input_len;
    std::size_t in_ch = 1;
    for (std::size_t l = 0; l < shape.depth; ++l) {
        ConvLayerParams conv(shape.n_ne, in_ch, shape.ksize, Padding::same);
        const double std_dev = 1.0 / std::sqrt(2.0 * static_cast<double>(in_ch * shape.ksize));
        for (auto& w : conv.kernels) w = {std_dev * rng.normal(), std_dev * rng.normal()};
        m.conv.push_back(std::move(conv));

        CvbnParams bn(shape.n_ne);
        for (std::size_t c = 0; c < shape.n_ne; ++c) {
            bn.gamma[c * 4 + 0] = bn.gamma[c * 4 + 3] = 1.0 / std::sqrt(2.0);
        }
        m.bn.push_back(std::move(bn));

        m.stage_len[l + 1] = m.stage_len[l] / 2;
        in_ch = shape.n_ne;
    }

    const std::size_t flat_dim = 2 * m.stage_len[shape.depth] * shape.n_ne;
    m.head = DenseHeadParams(flat_dim, shape.feat_dim, shape.class_count);
    m.head.dropout_rate = shape.dropout_rate;
    const double dense_bound = std::sqrt(6.0 / static_cast<double>(flat_dim + shape.feat_dim));
    for (auto& w : m.head.dense_weight.v) w = dense_bound * rng.uniform_signed();
    const double cls_bound =
        std::sqrt(6.0 / static_cast<double>(shape.feat_dim + shape.class_count));
    for (auto& w : m.head.classifier_weight.v) w = cls_bound * rng.uniform_signed();

    m.centers = Mat(shape.class_count, shape.feat_dim);
    snap_model_f32(m);
    return m;
}

void snap_model_f32(EmbeddingModel& m) {
    for (auto& c : m.conv) {
        snap_cvec(c.kernels);
        snap_cvec(c.biases);
    }
    for (auto& b : m.bn) {
        snap_vec(b.gamma);
        snap_vec(b.beta);
        snap_vec(b.running_mean);
        snap_vec(b.running_cov);
    }
    snap_vec(m.head.dense_weight.v);
    snap_vec(m.head.dense_bias);
    snap_vec(m.head.classifier_weight.v);
    snap_vec(m.head.classifier_bias);
    snap_vec(m.centers.v);
}

CxTensor signal_to_tensor(const ComplexSignal& sig) {
    CxTensor x(sig.length(), 1);
    for (std::size_t t = 0; t < sig.length(); ++t)
        x.v[t] = {static_cast<double>(sig.samples[t].real()),
                  static_cast<double>(sig.samples[t].imag())};
    return x;
}

BatchForward forward_batch(const EmbeddingModel& model, const std::vector<CxTensor>& batch,
                           Mode mode, Rng* rng, ForwardTrace* trace, MacCounter* macs) {
    const std::size_t B = batch.size();
    require(B > 0, Errc::shape_mismatch, "forward_batch: empty batch");
    for (const auto& x : batch)
        require(x.len == model.shape.input_len && x.ch == 1, Errc::shape_mismatch,
                "forward_batch: signal length incompatible with model");

    if (trace) {
        trace->input = batch;
        trace->layers.assign(model.shape.depth, {});
        trace->head.assign(B, {});
    }

    // Per-sample dropout seeds drawn up front in sample order, so worker
    // scheduling cannot change the masks.
    std::vector<std::uint64_t> dropout_seeds;
    if (mode == Mode::train && model.head.dropout_rate > 0.0) {
        require(rng != nullptr, Errc::missing_cache, "train forward needs an rng");
        dropout_seeds.resize(B);
        for (auto& s : dropout_seeds) s = rng->next();
    }

    std::vector<CxTensor> cur = batch;
    std::vector<MacCounter> mac_slots(macs ? B : 0);
    for (std::size_t l = 0; l < model.shape.depth; ++l) {
        const auto& convp = model.conv[l];
        std::vector<CxTensor> conv_out(B), relu_out(B);
        parallel_for(B, [&](std::size_t i) {
            conv_out[i] = cvconv1d_forward(cur[i], convp, macs ? &mac_slots[i] : nullptr);
            relu_out[i] = cvrelu(conv_out[i]);
        });

        CvbnCache bn_cache;
        std::vector<CxTensor> bn_out =
            cvbn_forward(relu_out, model.bn[l], mode, trace ? &trace->layers[l].bn : &bn_cache);

        std::vector<CxTensor> pool_out(B);
        std::vector<std::vector<std::uint32_t>> pool_idx(B);
        parallel_for(B, [&](std::size_t i) {
            pool_out[i] = magnitude_maxpool(bn_out[i], &pool_idx[i]);
        });

        if (trace) {
            trace->layers[l].conv_out = std::move(conv_out);
            trace->layers[l].relu_out = std::move(relu_out);
            trace->layers[l].pool_idx = std::move(pool_idx);
            trace->layers[l].pool_out = pool_out;
        }
        cur = std::move(pool_out);
    }
    if (macs)
        for (const auto& s : mac_slots) macs->real_macs += s.real_macs;

    BatchForward out;
    out.features = Mat(B, model.shape.feat_dim);
    out.logits = Mat(B, model.head.class_count);
    parallel_for(B, [&](std::size_t i) {
        Rng drop_rng(dropout_seeds.empty() ? 0 : dropout_seeds[i]);
        HeadOut ho = flatten_and_head(cur[i], model.head, mode,
                                      dropout_seeds.empty() ? nullptr : &drop_rng,
                                      trace ? &trace->head[i] : nullptr);
        std::copy(ho.feature.begin(), ho.feature.end(), out.features.row(i));
        std::copy(ho.logits.begin(), ho.logits.end(), out.logits.row(i));
    });
    return out;
}

void commit_bn_updates(EmbeddingModel& model, const ForwardTrace& trace) {
    require(trace.layers.size() == model.bn.size(), Errc::missing_cache,
            "commit_bn_updates: trace does not match model depth");
    for (std::size_t l = 0; l < model.bn.size(); ++l)
        cvbn_commit_running(model.bn[l], trace.layers[l].bn);
}

ModelGrads backward_batch(const EmbeddingModel& model, const ForwardTrace& trace,
                          const Mat& grad_features, const Mat& grad_logits,
                          std::vector<CxTensor>* input_grads) {
    const std::size_t B = trace.input.size();
    const std::size_t depth = model.shape.depth;
    require(trace.head.size() == B && trace.layers.size() == depth, Errc::missing_cache,
            "backward_batch: trace incomplete");
    require(grad_features.rows == B && grad_logits.rows == B, Errc::shape_mismatch,
            "backward_batch: gradient batch size mismatch");

    ModelGrads total;
    total.conv.resize(depth);
    total.bn.resize(depth);

    // Head backward per sample, summed in index order.
    const std::size_t head_in_len = model.stage_len[depth];
    std::vector<HeadGrads> head_slots(B);
    std::vector<CxTensor> grad(B);
    parallel_for(B, [&](std::size_t i) {
        std::vector<double> gf(grad_features.row(i), grad_features.row(i) + grad_features.cols);
        std::vector<double> gl(grad_logits.row(i), grad_logits.row(i) + grad_logits.cols);
        grad[i] = head_backward(gf, gl, trace.head[i], model.head, head_in_len,
                                model.shape.n_ne, head_slots[i]);
    });
    total.head.dense_weight = Mat(model.head.flat_dim, model.head.feat_dim);
    total.head.dense_bias.assign(model.head.feat_dim, 0.0);
    total.head.classifier_weight = Mat(model.head.feat_dim, model.head.class_count);
    total.head.classifier_bias.assign(model.head.class_count, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& h = head_slots[i];
        for (std::size_t k = 0; k < total.head.dense_weight.v.size(); ++k)
            total.head.dense_weight.v[k] += h.dense_weight.v[k];
        for (std::size_t k = 0; k < total.head.dense_bias.size(); ++k)
            total.head.dense_bias[k] += h.dense_bias[k];
        for (std::size_t k = 0; k < total.head.classifier_weight.v.size(); ++k)
            total.head.classifier_weight.v[k] += h.classifier_weight.v[k];
        for (std::size_t k = 0; k < total.head.classifier_bias.size(); ++k)
            total.head.classifier_bias[k] += h.classifier_bias[k];
    }

    for (std::size_t l = depth; l-- > 0;) {
        const auto& lt = trace.layers[l];
        const std::size_t bn_len = lt.relu_out.front().len;

        // pool backward
        std::vector<CxTensor> g_bn(B);
        parallel_for(B, [&](std::size_t i) {
            g_bn[i] =
                magnitude_maxpool_backward(grad[i], lt.pool_idx[i], bn_len, model.shape.n_ne);
        });

        // bn backward (couples the batch; summed internally in fixed order)
        std::vector<CxTensor> g_relu =
            cvbn_backward(g_bn, lt.relu_out, model.bn[l], lt.bn, total.bn[l]);

        // relu + conv backward per sample
        const std::vector<CxTensor>& conv_in = l == 0 ? trace.input : trace.layers[l - 1].pool_out;
        std::vector<ConvGrads> conv_slots(B);
        parallel_for(B, [&](std::size_t i) {
            CxTensor g_conv = cvrelu_backward(g_relu[i], lt.conv_out[i]);
            grad[i] = cvconv1d_backward(g_conv, conv_in[i], model.conv[l], conv_slots[i]);
        });
        total.conv[l].kernels.assign(model.conv[l].kernels.size(), cxd{0.0, 0.0});
        total.conv[l].biases.assign(model.conv[l].biases.size(), cxd{0.0, 0.0});
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t k = 0; k < conv_slots[i].kernels.size(); ++k)
                total.conv[l].kernels[k] += conv_slots[i].kernels[k];
            for (std::size_t k = 0; k < conv_slots[i].biases.size(); ++k)
                total.conv[l].biases[k] += conv_slots[i].biases[k];
        }
    }

    if (input_grads) *input_grads = std::move(grad);
    return total;
}

void sgd_step(EmbeddingModel& model, const ModelGrads& grads, double eta) {
    for (std::size_t l = 0; l < model.conv.size(); ++l) {
        auto& c = model.conv[l];
        const auto& g = grads.conv[l];
        for (std::size_t k = 0; k < c.kernels.size(); ++k) c.kernels[k] -= eta * g.kernels[k];
        for (std::size_t k = 0; k < c.biases.size(); ++k) c.biases[k] -= eta * g.biases[k];
        auto& b = model.bn[l];
        const auto& gb = grads.bn[l];
        for (std::size_t k = 0; k < b.gamma.size(); ++k) b.gamma[k] -= eta * gb.gamma[k];
        for (std::size_t k = 0; k < b.beta.size(); ++k) b.beta[k] -= eta * gb.beta[k];
    }
    auto& h = model.head;
    const auto& gh = grads.head;
    for (std::size_t k = 0; k < h.dense_weight.v.size(); ++k)
        h.dense_weight.v[k] -= eta * gh.dense_weight.v[k];
    for (std::size_t k = 0; k < h.dense_bias.size(); ++k) h.dense_bias[k] -= eta * gh.dense_bias[k];
    for (std::size_t k = 0; k < h.classifier_weight.v.size(); ++k)
        h.classifier_weight.v[k] -= eta * gh.classifier_weight.v[k];
    for (std::size_t k = 0; k < h.classifier_bias.size(); ++k)
        h.classifier_bias[k] -= eta * gh.classifier_bias[k];
}

Mat embed(const EmbeddingModel& model, const std::vector<const ComplexSignal*>& batch, Mode mode,
          Rng* rng) {
    std::vector<CxTensor> tensors(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) tensors[i] = signal_to_tensor(*batch[i]);
    BatchForward out = forward_batch(model, tensors, mode, rng);
    return std::move(out.features);
}

Mat embed_dataset(const EmbeddingModel& model, const LabeledDataset& data,
                  const std::vector<std::size_t>& indices) {
    std::vector<const ComplexSignal*> batch(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) batch[i] = &data.signals[indices[i]];
    return embed(model, batch);
}

}  // namespace cvsei
