#include "cvsei/layers.hpp"

#include <algorithm>
#include <cmath>

#include "cvsei/errors.hpp"

namespace cvsei {

namespace {

// Channel-major real/imaginary planes of a [len x ch] complex tensor, with
// `pad` zero samples on each side of the time axis. Keeps the convolution
// inner loops contiguous and branch-free.
struct Planes {
    std::size_t len, ch, pad;
    std::vector<double> re, im;

    Planes(const CxTensor& x, std::size_t pad_) : len(x.len), ch(x.ch), pad(pad_) {
        const std::size_t stride = len + 2 * pad;
        re.assign(ch * stride, 0.0);
        im.assign(ch * stride, 0.0);
        for (std::size_t c = 0; c < ch; ++c) {
            double* r = re.data() + c * stride + pad;
            double* i = im.data() + c * stride + pad;
            for (std::size_t t = 0; t < len; ++t) {
                const cxd& v = x.at(t, c);
                r[t] = v.real();
                i[t] = v.imag();
            }
        }
    }
    const double* re_row(std::size_t c) const { return re.data() + c * (len + 2 * pad); }
    const double* im_row(std::size_t c) const { return im.data() + c * (len + 2 * pad); }
};

}  // namespace

CxTensor cvconv1d_forward(const CxTensor& input, const ConvLayerParams& p, MacCounter* macs) {
    require(input.ch == p.in_ch, Errc::shape_mismatch,
            "conv input has " + std::to_string(input.ch) + " channels, layer expects " +
                std::to_string(p.in_ch));
    if (p.padding == Padding::same)
        require(p.ksize % 2 == 1, Errc::shape_mismatch, "same padding requires odd kernel size");
    else
        require(input.len >= p.ksize, Errc::shape_mismatch, "input shorter than valid kernel");

    const std::size_t pad = p.padding == Padding::same ? (p.ksize - 1) / 2 : 0;
    const std::size_t out_len = p.out_len(input.len);
    const Planes in(input, pad);

    CxTensor out(out_len, p.out_ch);
    std::vector<double> acc_re(out_len), acc_im(out_len);
    for (std::size_t m = 0; m < p.out_ch; ++m) {
        std::fill(acc_re.begin(), acc_re.end(), p.biases[m].real());
        std::fill(acc_im.begin(), acc_im.end(), p.biases[m].imag());
        for (std::size_t n = 0; n < p.in_ch; ++n) {
            const double* xr = in.re_row(n);
            const double* xi = in.im_row(n);
            for (std::size_t k = 0; k < p.ksize; ++k) {
                const cxd w = p.kernel(m, n, k);
                const double wr = w.real(), wi = w.imag();
                const double* sr = xr + k;
                const double* si = xi + k;
                // The four real convolutions of the complex product, over the
                // zero-extended input (padding positions count as MACs too).
                for (std::size_t t = 0; t < out_len; ++t) {
                    acc_re[t] += wr * sr[t] - wi * si[t];
                    acc_im[t] += wi * sr[t] + wr * si[t];
                }
                if (macs) macs->real_macs += 4 * static_cast<std::uint64_t>(out_len);
            }
        }
        for (std::size_t t = 0; t < out_len; ++t) out.at(t, m) = {acc_re[t], acc_im[t]};
    }
    return out;
}

CxTensor cvconv1d_backward(const CxTensor& upstream, const CxTensor& cached_input,
                           const ConvLayerParams& p, ConvGrads& grads) {
    require(cached_input.ch == p.in_ch && upstream.ch == p.out_ch, Errc::shape_mismatch,
            "conv backward channel mismatch");
    const std::size_t out_len = p.out_len(cached_input.len);
    require(upstream.len == out_len, Errc::shape_mismatch, "conv backward length mismatch");

    const std::size_t pad = p.padding == Padding::same ? (p.ksize - 1) / 2 : 0;
    const Planes in(cached_input, pad);
    const Planes g(upstream, 0);

    grads.kernels.assign(p.kernels.size(), cxd{0.0, 0.0});
    grads.biases.assign(p.biases.size(), cxd{0.0, 0.0});

    // dW[m,n,k] = sum_t g[t,m] * conj(in[t+k-pad, n]); db[m] = sum_t g[t,m].
    for (std::size_t m = 0; m < p.out_ch; ++m) {
        const double* gr = g.re_row(m);
        const double* gi = g.im_row(m);
        double br = 0.0, bi = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) {
            br += gr[t];
            bi += gi[t];
        }
        grads.biases[m] = {br, bi};
        for (std::size_t n = 0; n < p.in_ch; ++n) {
            const double* xr = in.re_row(n);
            const double* xi = in.im_row(n);
            for (std::size_t k = 0; k < p.ksize; ++k) {
                const double* sr = xr + k;
                const double* si = xi + k;
                double wr = 0.0, wi = 0.0;
                for (std::size_t t = 0; t < out_len; ++t) {
                    wr += gr[t] * sr[t] + gi[t] * si[t];
                    wi += gi[t] * sr[t] - gr[t] * si[t];
                }
                grads.kernels[(m * p.in_ch + n) * p.ksize + k] = {wr, wi};
            }
        }
    }

    // din[s,n] = sum_{m,k} g[s-k+pad, m] * conj(W[m,n,k]).
    CxTensor din(cached_input.len, cached_input.ch);
    std::vector<double> dre(cached_input.len), dim_(cached_input.len);
    for (std::size_t n = 0; n < p.in_ch; ++n) {
        std::fill(dre.begin(), dre.end(), 0.0);
        std::fill(dim_.begin(), dim_.end(), 0.0);
        for (std::size_t m = 0; m < p.out_ch; ++m) {
            const double* gr = g.re_row(m);
            const double* gi = g.im_row(m);
            for (std::size_t k = 0; k < p.ksize; ++k) {
                const cxd w = p.kernel(m, n, k);
                const double wr = w.real(), wi = w.imag();
                // valid upstream positions u = s - k + pad in [0, out_len)
                for (std::size_t s = 0; s < cached_input.len; ++s) {
                    const std::ptrdiff_t u =
                        static_cast<std::ptrdiff_t>(s + pad) - static_cast<std::ptrdiff_t>(k);
                    if (u < 0 || u >= static_cast<std::ptrdiff_t>(out_len)) continue;
                    dre[s] += gr[u] * wr + gi[u] * wi;
                    dim_[s] += gi[u] * wr - gr[u] * wi;
                }
            }
        }
        for (std::size_t s = 0; s < cached_input.len; ++s) din.at(s, n) = {dre[s], dim_[s]};
    }
    return din;
}

CxTensor cvrelu(const CxTensor& input) {
    CxTensor out(input.len, input.ch);
    for (std::size_t i = 0; i < input.v.size(); ++i) {
        const cxd& v = input.v[i];
        out.v[i] = {v.real() > 0.0 ? v.real() : 0.0, v.imag() > 0.0 ? v.imag() : 0.0};
    }
    return out;
}

CxTensor cvrelu_backward(const CxTensor& upstream, const CxTensor& cached_input) {
    require(upstream.len == cached_input.len && upstream.ch == cached_input.ch,
            Errc::shape_mismatch, "cvrelu backward shape mismatch");
    CxTensor din(cached_input.len, cached_input.ch);
    for (std::size_t i = 0; i < cached_input.v.size(); ++i) {
        const cxd& v = cached_input.v[i];
        const cxd& g = upstream.v[i];
        din.v[i] = {v.real() > 0.0 ? g.real() : 0.0, v.imag() > 0.0 ? g.imag() : 0.0};
    }
    return din;
}

namespace {

// Inverse square root of the symmetric positive-definite 2x2 [a b; b c],
// closed form: M^(1/2) = (M + sI)/t with s = sqrt(det), t = sqrt(tr + 2s),
// so M^(-1/2) = adj(M + sI) / (s t). Returns {A00, A01, A11}.
struct InvSqrt2x2 {
    double a00, a01, a11;
};

InvSqrt2x2 inv_sqrt_2x2(double a, double b, double c) {
    const double s = std::sqrt(a * c - b * b);
    const double t = std::sqrt(a + c + 2.0 * s);
    const double d = s * t;
    return {(c + s) / d, -b / d, (a + s) / d};
}

}  // namespace

std::vector<CxTensor> cvbn_forward(const std::vector<CxTensor>& batch, const CvbnParams& p,
                                   Mode mode, CvbnCache* cache) {
    require(!batch.empty(), Errc::degenerate_batch, "cvbn: empty batch");
    const std::size_t ch = batch.front().ch;
    require(ch == p.ch, Errc::shape_mismatch, "cvbn channel mismatch");
    std::size_t population = 0;
    for (const auto& x : batch) {
        require(x.ch == ch, Errc::shape_mismatch, "cvbn: ragged batch");
        population += x.len;
    }
    if (mode == Mode::train)
        require(population >= 2, Errc::degenerate_batch,
                "cvbn train mode needs a population of at least 2 per channel");

    CvbnCache local;
    CvbnCache& cc = cache ? *cache : local;
    cc.mu.assign(ch * 2, 0.0);
    cc.m_cov.assign(ch * 3, 0.0);
    cc.inv_sqrt.assign(ch * 3, 0.0);
    cc.population = population;
    cc.mode = mode;
    cc.new_running_mean.clear();
    cc.new_running_cov.clear();

    if (mode == Mode::train) {
        // Batch statistics pooled over batch x length, per channel, summed in
        // fixed batch order for determinism.
        std::vector<double> sr(ch, 0.0), si(ch, 0.0), srr(ch, 0.0), sii(ch, 0.0), sri(ch, 0.0);
        for (const auto& x : batch) {
            for (std::size_t t = 0; t < x.len; ++t) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const cxd& v = x.at(t, c);
                    const double r = v.real(), i = v.imag();
                    sr[c] += r;
                    si[c] += i;
                    srr[c] += r * r;
                    sii[c] += i * i;
                    sri[c] += r * i;
                }
            }
        }
        const double inv_n = 1.0 / static_cast<double>(population);
        cc.new_running_mean.assign(ch * 2, 0.0);
        cc.new_running_cov.assign(ch * 4, 0.0);
        for (std::size_t c = 0; c < ch; ++c) {
            const double mr = sr[c] * inv_n, mi = si[c] * inv_n;
            const double vrr = srr[c] * inv_n - mr * mr;
            const double vii = sii[c] * inv_n - mi * mi;
            const double vri = sri[c] * inv_n - mr * mi;
            cc.mu[c * 2 + 0] = mr;
            cc.mu[c * 2 + 1] = mi;
            cc.m_cov[c * 3 + 0] = vrr + p.epsilon;
            cc.m_cov[c * 3 + 1] = vri;
            cc.m_cov[c * 3 + 2] = vii + p.epsilon;
            const double mom = p.momentum;
            cc.new_running_mean[c * 2 + 0] = mom * p.running_mean[c * 2 + 0] + (1 - mom) * mr;
            cc.new_running_mean[c * 2 + 1] = mom * p.running_mean[c * 2 + 1] + (1 - mom) * mi;
            cc.new_running_cov[c * 4 + 0] = mom * p.running_cov[c * 4 + 0] + (1 - mom) * vrr;
            cc.new_running_cov[c * 4 + 1] = mom * p.running_cov[c * 4 + 1] + (1 - mom) * vri;
            cc.new_running_cov[c * 4 + 2] = mom * p.running_cov[c * 4 + 2] + (1 - mom) * vri;
            cc.new_running_cov[c * 4 + 3] = mom * p.running_cov[c * 4 + 3] + (1 - mom) * vii;
        }
    } else {
        for (std::size_t c = 0; c < ch; ++c) {
            cc.mu[c * 2 + 0] = p.running_mean[c * 2 + 0];
            cc.mu[c * 2 + 1] = p.running_mean[c * 2 + 1];
            cc.m_cov[c * 3 + 0] = p.running_cov[c * 4 + 0] + p.epsilon;
            cc.m_cov[c * 3 + 1] =
                0.5 * (p.running_cov[c * 4 + 1] + p.running_cov[c * 4 + 2]);
            cc.m_cov[c * 3 + 2] = p.running_cov[c * 4 + 3] + p.epsilon;
        }
    }

    for (std::size_t c = 0; c < ch; ++c) {
        const auto A =
            inv_sqrt_2x2(cc.m_cov[c * 3 + 0], cc.m_cov[c * 3 + 1], cc.m_cov[c * 3 + 2]);
        cc.inv_sqrt[c * 3 + 0] = A.a00;
        cc.inv_sqrt[c * 3 + 1] = A.a01;
        cc.inv_sqrt[c * 3 + 2] = A.a11;
    }

    std::vector<CxTensor> out(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& x = batch[b];
        out[b] = CxTensor(x.len, x.ch);
        for (std::size_t c = 0; c < ch; ++c) {
            const double mr = cc.mu[c * 2 + 0], mi = cc.mu[c * 2 + 1];
            const double a00 = cc.inv_sqrt[c * 3 + 0], a01 = cc.inv_sqrt[c * 3 + 1],
                         a11 = cc.inv_sqrt[c * 3 + 2];
            const double grr = p.gamma[c * 4 + 0], gri = p.gamma[c * 4 + 1],
                         gir = p.gamma[c * 4 + 2], gii = p.gamma[c * 4 + 3];
            const double br = p.beta[c * 2 + 0], bi = p.beta[c * 2 + 1];
            for (std::size_t t = 0; t < x.len; ++t) {
                const cxd& v = x.at(t, c);
                const double xr = v.real() - mr, xi = v.imag() - mi;
                const double yr = a00 * xr + a01 * xi;
                const double yi = a01 * xr + a11 * xi;
                out[b].at(t, c) = {grr * yr + gri * yi + br, gir * yr + gii * yi + bi};
            }
        }
    }
    return out;
}

CxTensor cvbn_forward_one(const CxTensor& input, const CvbnParams& p, Mode mode,
                          CvbnCache* cache) {
    std::vector<CxTensor> batch(1, input);
    return cvbn_forward(batch, p, mode, cache)[0];
}

std::vector<CxTensor> cvbn_backward(const std::vector<CxTensor>& upstream,
                                    const std::vector<CxTensor>& cached_input,
                                    const CvbnParams& p, const CvbnCache& cache,
                                    CvbnGrads& grads) {
    require(upstream.size() == cached_input.size(), Errc::shape_mismatch,
            "cvbn backward batch size mismatch");
    const std::size_t ch = p.ch;
    grads.gamma.assign(ch * 4, 0.0);
    grads.beta.assign(ch * 2, 0.0);

    std::vector<CxTensor> din(upstream.size());
    for (std::size_t b = 0; b < upstream.size(); ++b)
        din[b] = CxTensor(cached_input[b].len, cached_input[b].ch);

    const double n_inv = 1.0 / static_cast<double>(cache.population);

    for (std::size_t c = 0; c < ch; ++c) {
        const double mr = cache.mu[c * 2 + 0], mi = cache.mu[c * 2 + 1];
        const double a00 = cache.inv_sqrt[c * 3 + 0], a01 = cache.inv_sqrt[c * 3 + 1],
                     a11 = cache.inv_sqrt[c * 3 + 2];
        const double grr = p.gamma[c * 4 + 0], gri = p.gamma[c * 4 + 1],
                     gir = p.gamma[c * 4 + 2], gii = p.gamma[c * 4 + 3];

        // First pass: gamma/beta grads, h = gamma^T g sums, and P = sum h (v-mu)^T.
        double dg_rr = 0, dg_ri = 0, dg_ir = 0, dg_ii = 0, db_r = 0, db_i = 0;
        double hsum_r = 0, hsum_i = 0;
        double p00 = 0, p01 = 0, p10 = 0, p11 = 0;
        for (std::size_t b = 0; b < upstream.size(); ++b) {
            const auto& g = upstream[b];
            const auto& x = cached_input[b];
            for (std::size_t t = 0; t < g.len; ++t) {
                const cxd& gv = g.at(t, c);
                const cxd& xv = x.at(t, c);
                const double cr = xv.real() - mr, ci = xv.imag() - mi;
                const double yr = a00 * cr + a01 * ci;
                const double yi = a01 * cr + a11 * ci;
                dg_rr += gv.real() * yr;
                dg_ri += gv.real() * yi;
                dg_ir += gv.imag() * yr;
                dg_ii += gv.imag() * yi;
                db_r += gv.real();
                db_i += gv.imag();
                const double hr = grr * gv.real() + gir * gv.imag();
                const double hi = gri * gv.real() + gii * gv.imag();
                hsum_r += hr;
                hsum_i += hi;
                p00 += hr * cr;
                p01 += hr * ci;
                p10 += hi * cr;
                p11 += hi * ci;
            }
        }
        grads.gamma[c * 4 + 0] = dg_rr;
        grads.gamma[c * 4 + 1] = dg_ri;
        grads.gamma[c * 4 + 2] = dg_ir;
        grads.gamma[c * 4 + 3] = dg_ii;
        grads.beta[c * 2 + 0] = db_r;
        grads.beta[c * 2 + 1] = db_i;

        double gm_aa = 0, gm_ab = 0, gm_cc = 0;
        if (cache.mode == Mode::train) {
            // dL/dM through the closed-form inverse square root
            // A = adj(M + sI)/(s t), s = sqrt(det M), t = sqrt(tr M + 2s).
            const double a = cache.m_cov[c * 3 + 0], bb = cache.m_cov[c * 3 + 1],
                         cc2 = cache.m_cov[c * 3 + 2];
            const double s = std::sqrt(a * cc2 - bb * bb);
            const double t = std::sqrt(a + cc2 + 2.0 * s);
            const double d = s * t;
            const double s_a = cc2 / (2.0 * s), s_c = a / (2.0 * s), s_b = -bb / s;
            auto d_of = [&](double tr_x, double s_x) {
                const double t_x = (tr_x + 2.0 * s_x) / (2.0 * t);
                return t * s_x + s * t_x;
            };
            const double d_a = d_of(1.0, s_a), d_b = d_of(0.0, s_b), d_c = d_of(1.0, s_c);
            const double pa01 = p01 + p10;  // off-diagonal slots share the b entry
            auto dl_dx = [&](double delta_c, double delta_b, double delta_a, double s_x,
                             double d_x) {
                const double dA00 = ((delta_c + s_x) * d - (cc2 + s) * d_x) / (d * d);
                const double dA01 = (-delta_b * d + bb * d_x) / (d * d);
                const double dA11 = ((delta_a + s_x) * d - (a + s) * d_x) / (d * d);
                return p00 * dA00 + pa01 * dA01 + p11 * dA11;
            };
            gm_aa = dl_dx(0.0, 0.0, 1.0, s_a, d_a);
            gm_ab = dl_dx(0.0, 1.0, 0.0, s_b, d_b);
            gm_cc = dl_dx(1.0, 0.0, 0.0, s_c, d_c);
        }

        // Second pass: per-element input gradients.
        for (std::size_t b = 0; b < upstream.size(); ++b) {
            const auto& g = upstream[b];
            const auto& x = cached_input[b];
            for (std::size_t t = 0; t < g.len; ++t) {
                const cxd& gv = g.at(t, c);
                const double hr = grr * gv.real() + gir * gv.imag();
                const double hi = gri * gv.real() + gii * gv.imag();
                double dr = a00 * hr + a01 * hi;
                double di = a01 * hr + a11 * hi;
                if (cache.mode == Mode::train) {
                    const cxd& xv = x.at(t, c);
                    const double cr = xv.real() - mr, ci = xv.imag() - mi;
                    dr -= n_inv * (a00 * hsum_r + a01 * hsum_i);
                    di -= n_inv * (a01 * hsum_r + a11 * hsum_i);
                    dr += n_inv * (2.0 * gm_aa * cr + gm_ab * ci);
                    di += n_inv * (2.0 * gm_cc * ci + gm_ab * cr);
                }
                din[b].at(t, c) = {dr, di};
            }
        }
    }
    return din;
}

void cvbn_commit_running(CvbnParams& p, const CvbnCache& cache) {
    require(!cache.new_running_mean.empty(), Errc::missing_cache,
            "cvbn_commit_running: cache has no train statistics");
    p.running_mean = cache.new_running_mean;
    p.running_cov = cache.new_running_cov;
}

CxTensor magnitude_maxpool(const CxTensor& input, std::vector<std::uint32_t>* indices) {
    require(input.len >= 2, Errc::shape_mismatch, "maxpool needs length >= 2");
    const std::size_t out_len = input.len / 2;
    CxTensor out(out_len, input.ch);
    if (indices) indices->assign(out_len * input.ch, 0);
    for (std::size_t t = 0; t < out_len; ++t) {
        for (std::size_t c = 0; c < input.ch; ++c) {
            const cxd& a = input.at(2 * t, c);
            const cxd& b = input.at(2 * t + 1, c);
            // tie -> earlier index
            const bool take_second = std::norm(b) > std::norm(a);
            out.at(t, c) = take_second ? b : a;
            if (indices)
                (*indices)[t * input.ch + c] = static_cast<std::uint32_t>(2 * t + take_second);
        }
    }
    return out;
}

CxTensor magnitude_maxpool_backward(const CxTensor& upstream,
                                    const std::vector<std::uint32_t>& indices,
                                    std::size_t input_len, std::size_t ch) {
    require(indices.size() == upstream.len * upstream.ch, Errc::missing_cache,
            "maxpool backward: index cache size mismatch");
    CxTensor din(input_len, ch);
    for (std::size_t t = 0; t < upstream.len; ++t) {
        for (std::size_t c = 0; c < ch; ++c) {
            const std::uint32_t src = indices[t * ch + c];
            din.at(src, c) += upstream.at(t, c);
        }
    }
    return din;
}

std::vector<double> flatten_complex(const CxTensor& input) {
    const std::size_t half = input.len * input.ch;
    std::vector<double> flat(2 * half);
    for (std::size_t i = 0; i < half; ++i) {
        flat[i] = input.v[i].real();
        flat[half + i] = input.v[i].imag();
    }
    return flat;
}

HeadOut flatten_and_head(const CxTensor& input, const DenseHeadParams& head, Mode mode, Rng* rng,
                         HeadCache* cache) {
    std::vector<double> flat = flatten_complex(input);
    require(flat.size() == head.flat_dim, Errc::shape_mismatch,
            "head expects flat dim " + std::to_string(head.flat_dim) + ", got " +
                std::to_string(flat.size()));

    std::vector<double> pre = head.dense_bias;
    for (std::size_t i = 0; i < head.flat_dim; ++i) {
        const double xi = flat[i];
        if (xi == 0.0) continue;
        const double* w = head.dense_weight.row(i);
        for (std::size_t j = 0; j < head.feat_dim; ++j) pre[j] += xi * w[j];
    }

    std::vector<double> feature(head.feat_dim);
    for (std::size_t j = 0; j < head.feat_dim; ++j)
        feature[j] = pre[j] > 0.0 ? pre[j] : 0.0;

    std::vector<double> mask;
    if (mode == Mode::train && head.dropout_rate > 0.0) {
        require(rng != nullptr, Errc::missing_cache, "train-mode head needs an rng for dropout");
        const double keep = 1.0 - head.dropout_rate;
        mask.resize(head.feat_dim);
        for (std::size_t j = 0; j < head.feat_dim; ++j)
            mask[j] = rng->uniform() < keep ? 1.0 / keep : 0.0;
        for (std::size_t j = 0; j < head.feat_dim; ++j) feature[j] *= mask[j];
    }

    std::vector<double> logits = head.classifier_bias;
    for (std::size_t j = 0; j < head.feat_dim; ++j) {
        const double fj = feature[j];
        if (fj == 0.0) continue;
        const double* w = head.classifier_weight.row(j);
        for (std::size_t k = 0; k < head.class_count; ++k) logits[k] += fj * w[k];
    }

    if (cache) {
        cache->flat = std::move(flat);
        cache->pre_relu = pre;
        cache->mask = mask;
        cache->feature = feature;
    }
    return {std::move(feature), std::move(logits)};
}

CxTensor head_backward(const std::vector<double>& grad_feature,
                       const std::vector<double>& grad_logits, const HeadCache& cache,
                       const DenseHeadParams& head, std::size_t in_len, std::size_t in_ch,
                       HeadGrads& grads) {
    require(cache.flat.size() == head.flat_dim, Errc::missing_cache,
            "head backward: cache missing or wrong shape");

    grads.dense_weight = Mat(head.flat_dim, head.feat_dim);
    grads.dense_bias.assign(head.feat_dim, 0.0);
    grads.classifier_weight = Mat(head.feat_dim, head.class_count);
    grads.classifier_bias = grad_logits;

    // Feature grad = external part + classifier path.
    std::vector<double> df = grad_feature;
    df.resize(head.feat_dim, 0.0);
    for (std::size_t j = 0; j < head.feat_dim; ++j) {
        const double* w = head.classifier_weight.row(j);
        double acc = df[j];
        for (std::size_t k = 0; k < head.class_count; ++k) acc += w[k] * grad_logits[k];
        df[j] = acc;
        double* gw = grads.classifier_weight.row(j);
        const double fj = cache.feature[j];
        for (std::size_t k = 0; k < head.class_count; ++k) gw[k] = fj * grad_logits[k];
    }

    // Dropout, then ReLU.
    std::vector<double> du(head.feat_dim);
    for (std::size_t j = 0; j < head.feat_dim; ++j) {
        double v = df[j];
        if (!cache.mask.empty()) v *= cache.mask[j];
        du[j] = cache.pre_relu[j] > 0.0 ? v : 0.0;
    }
    grads.dense_bias = du;

    std::vector<double> dflat(head.flat_dim, 0.0);
    for (std::size_t i = 0; i < head.flat_dim; ++i) {
        const double xi = cache.flat[i];
        const double* w = head.dense_weight.row(i);
        double* gw = grads.dense_weight.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < head.feat_dim; ++j) {
            gw[j] = xi * du[j];
            acc += w[j] * du[j];
        }
        dflat[i] = acc;
    }

    // Un-flatten: same storage order as flatten_complex.
    const std::size_t half = head.flat_dim / 2;
    require(in_len * in_ch == half, Errc::shape_mismatch, "head backward: bad unflatten shape");
    CxTensor din(in_len, in_ch);
    for (std::size_t i = 0; i < half; ++i) din.v[i] = {dflat[i], dflat[half + i]};
    return din;
}

}  // namespace cvsei
