#pragma once

// Minimal dense-tensor NN kernel: the five layer types the drop network needs
// (conv, batch norm, leaky ReLU / sigmoid, max pool, dropout), their backward
// passes, and momentum SGD. Templated on scalar type; float in production,
// double in the gradient-check harness.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "drip/common.hpp"
#include "drip/tensor.hpp"

namespace drip::nn {

template <typename T>
struct ConvParamsT {
    int k = 0;        // kernel size, 1 or 5
    int in_ch = 0;
    int out_ch = 0;
    std::vector<T> w;  // (k, k, in, out) row-major
    std::vector<T> b;  // (out)

    void validate() const {
        if (k != 1 && k != 5) throw ParamError("conv params: kernel size must be 1 or 5");
        if (w.size() != static_cast<std::size_t>(k) * k * in_ch * out_ch)
            throw ShapeError("conv params: weight count != k*k*in*out");
        if (b.size() != static_cast<std::size_t>(out_ch))
            throw ShapeError("conv params: bias count != out");
    }
};

template <typename T>
struct BatchNormParamsT {
    std::vector<T> gamma, beta, running_mean, running_var;  // each (channels)
    T epsilon = T(1e-5);
    T momentum = T(0.1);  // running = (1-momentum)*running + momentum*batch

    int channels() const { return static_cast<int>(gamma.size()); }

    static BatchNormParamsT identity(int ch) {
        BatchNormParamsT p;
        p.gamma.assign(ch, T(1));
        p.beta.assign(ch, T(0));
        p.running_mean.assign(ch, T(0));
        p.running_var.assign(ch, T(1));
        return p;
    }

    void validate() const {
        const std::size_t ch = gamma.size();
        if (beta.size() != ch || running_mean.size() != ch || running_var.size() != ch)
            throw ShapeError("batch norm params: array sizes differ");
        if (!(epsilon > T(0))) throw ParamError("batch norm params: epsilon must be > 0");
        for (T v : running_var)
            if (v < T(0)) throw ParamError("batch norm params: running_var must be >= 0");
    }
};

namespace detail {

// C(MxN) += A(MxK) * B(KxN). Row-major, accumulation in the output type.
// The a*row(B) inner loop keeps rows contiguous so -O3 vectorizes it without
// reassociating any reduction (bit-deterministic results).
template <typename T>
inline void matmul_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const T* a_row = A + static_cast<std::size_t>(m) * K;
        T* c_row = C + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const T a = a_row[k];
            const T* b_row = B + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) c_row[n] += a * b_row[n];
        }
    }
}

// C(KxN) += A^T(KxM) * B(MxN), with A given as (MxK).
template <typename T>
inline void matmul_atb_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const T* a_row = A + static_cast<std::size_t>(m) * K;
        const T* b_row = B + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const T a = a_row[k];
            T* c_row = C + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) c_row[n] += a * b_row[n];
        }
    }
}

// Patch matrix for one sample: row per output pixel, k*k*in columns,
// zero-filled outside the input ("same" padding).
template <typename T>
inline void im2col(const Tensor4T<T>& x, int sample, int k, std::vector<T>& col) {
    const int h = x.h, w = x.w, c = x.c;
    const int pad = k / 2;
    const std::size_t K = static_cast<std::size_t>(k) * k * c;
    col.assign(static_cast<std::size_t>(h) * w * K, T(0));
    const T* xp = x.v.data() + static_cast<std::size_t>(sample) * h * w * c;
    for (int oy = 0; oy < h; ++oy) {
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < w; ++ox) {
                T* dst = col.data() + (static_cast<std::size_t>(oy) * w + ox) * K +
                         (static_cast<std::size_t>(ky) * k) * c;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const T* src = xp + (static_cast<std::size_t>(iy) * w + ix) * c;
                    std::copy(src, src + c, dst + static_cast<std::size_t>(kx) * c);
                }
            }
        }
    }
}

// Scatter-add of a patch-matrix gradient back onto the input layout.
template <typename T>
inline void col2im_acc(const std::vector<T>& dcol, int h, int w, int c, int k, int sample,
                       Tensor4T<T>& dx) {
    const int pad = k / 2;
    const std::size_t K = static_cast<std::size_t>(k) * k * c;
    T* xp = dx.v.data() + static_cast<std::size_t>(sample) * h * w * c;
    for (int oy = 0; oy < h; ++oy) {
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < w; ++ox) {
                const T* src = dcol.data() + (static_cast<std::size_t>(oy) * w + ox) * K +
                               (static_cast<std::size_t>(ky) * k) * c;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    T* dst = xp + (static_cast<std::size_t>(iy) * w + ix) * c;
                    const T* s = src + static_cast<std::size_t>(kx) * c;
                    for (int ci = 0; ci < c; ++ci) dst[ci] += s[ci];
                }
            }
        }
    }
}

template <typename T>
inline T sigmoid_scalar(T x) {
    const T y = T(1) / (T(1) + std::exp(-x));
    // keep the open-interval guarantee under float saturation
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
    const T lo = std::numeric_limits<T>::min();
    return std::clamp(y, lo, hi);
}

}  // namespace detail

// ---- forward kernels ----

template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& x, const ConvParamsT<T>& p) {
    p.validate();
    if (x.c != p.in_ch) throw ShapeError("conv2d: input channels != params.in_channels");
    if (!x.all_finite()) throw ParamError("conv2d: non-finite input rejected");
    Tensor4T<T> y(x.n, x.h, x.w, p.out_ch);
    const int M = x.h * x.w;
    const int K = p.k * p.k * p.in_ch;
    const int N = p.out_ch;
    std::vector<T> col;
    for (int s = 0; s < x.n; ++s) {
        detail::im2col(x, s, p.k, col);
        T* yp = y.v.data() + static_cast<std::size_t>(s) * M * N;
        for (int m = 0; m < M; ++m)
            std::copy(p.b.begin(), p.b.end(), yp + static_cast<std::size_t>(m) * N);
        detail::matmul_acc(col.data(), p.w.data(), yp, M, K, N);
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor4T<T>& x, const ConvParamsT<T>& p, const Tensor4T<T>& dy,
                     Tensor4T<T>& dx, std::vector<T>& dw, std::vector<T>& db) {
    if (dy.n != x.n || dy.h != x.h || dy.w != x.w || dy.c != p.out_ch)
        throw ShapeError("conv2d_backward: upstream gradient dims mismatch");
    dx = Tensor4T<T>(x.n, x.h, x.w, x.c);
    dw.assign(p.w.size(), T(0));
    db.assign(p.b.size(), T(0));
    const int M = x.h * x.w;
    const int K = p.k * p.k * p.in_ch;
    const int N = p.out_ch;
    // W as (K x N) transposed once for the dcol product
    std::vector<T> wt(static_cast<std::size_t>(N) * K);
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) wt[static_cast<std::size_t>(n) * K + k] = p.w[static_cast<std::size_t>(k) * N + n];
    std::vector<T> col, dcol(static_cast<std::size_t>(M) * K);
    for (int s = 0; s < x.n; ++s) {
        detail::im2col(x, s, p.k, col);
        const T* dyp = dy.v.data() + static_cast<std::size_t>(s) * M * N;
        detail::matmul_atb_acc(col.data(), dyp, dw.data(), M, K, N);
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) db[n] += dyp[static_cast<std::size_t>(m) * N + n];
        std::fill(dcol.begin(), dcol.end(), T(0));
        detail::matmul_acc(dyp, wt.data(), dcol.data(), M, N, K);
        detail::col2im_acc(dcol, x.h, x.w, x.c, p.k, s, dx);
    }
}

template <typename T>
Tensor4T<T> leaky_relu(const Tensor4T<T>& x) {
    Tensor4T<T> y = x;
    for (T& v : y.v) v = v > T(0) ? v : T(0.1) * v;
    return y;
}

template <typename T>
Tensor4T<T> leaky_relu_backward(const Tensor4T<T>& x, const Tensor4T<T>& dy) {
    require_same_dims(x, dy, "leaky_relu_backward");
    Tensor4T<T> dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        if (x.v[i] <= T(0)) dx.v[i] *= T(0.1);
    return dx;
}

template <typename T>
Tensor4T<T> sigmoid(const Tensor4T<T>& x) {
    Tensor4T<T> y = x;
    for (T& v : y.v) v = detail::sigmoid_scalar(v);
    return y;
}

// dy scaled by the derivative expressed through the cached output y.
template <typename T>
Tensor4T<T> sigmoid_backward(const Tensor4T<T>& y, const Tensor4T<T>& dy) {
    require_same_dims(y, dy, "sigmoid_backward");
    Tensor4T<T> dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y.v[i] * (T(1) - y.v[i]);
    return dx;
}

template <typename T>
Tensor4T<T> max_pool2(const Tensor4T<T>& x, std::vector<std::size_t>* argmax_out = nullptr) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw ShapeError("max_pool2: spatial dims must be even");
    Tensor4T<T> y(x.n, x.h / 2, x.w / 2, x.c);
    if (argmax_out) argmax_out->resize(y.size());
    std::size_t oi = 0;
    for (int s = 0; s < x.n; ++s)
        for (int oy = 0; oy < y.h; ++oy)
            for (int ox = 0; ox < y.w; ++ox)
                for (int ci = 0; ci < x.c; ++ci, ++oi) {
                    std::size_t best_idx = 0;
                    T best = -std::numeric_limits<T>::infinity();
                    for (int dy_ = 0; dy_ < 2; ++dy_)
                        for (int dx_ = 0; dx_ < 2; ++dx_) {
                            const std::size_t idx =
                                ((static_cast<std::size_t>(s) * x.h + 2 * oy + dy_) * x.w + 2 * ox + dx_) * x.c + ci;
                            if (x.v[idx] > best) {
                                best = x.v[idx];
                                best_idx = idx;
                            }
                        }
                    y.v[oi] = best;
                    if (argmax_out) (*argmax_out)[oi] = best_idx;
                }
    return y;
}

template <typename T>
Tensor4T<T> max_pool2_backward(const Tensor4T<T>& dy, const std::vector<std::size_t>& argmax,
                               int in_n, int in_h, int in_w, int in_c) {
    if (argmax.size() != dy.size()) throw ShapeError("max_pool2_backward: argmax cache size mismatch");
    Tensor4T<T> dx(in_n, in_h, in_w, in_c);
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[argmax[i]] += dy.v[i];
    return dx;
}

template <typename T>
struct BnCacheT {
    Tensor4T<T> xhat;
    std::vector<T> inv_std;  // per channel
    bool valid = false;
};

template <typename T>
Tensor4T<T> batch_norm(const Tensor4T<T>& x, BatchNormParamsT<T>& p, Mode mode,
                       BnCacheT<T>* cache = nullptr) {
    p.validate();
    const int ch = p.channels();
    if (x.c != ch) throw ShapeError("batch_norm: channel count mismatch");
    Tensor4T<T> y(x.n, x.h, x.w, x.c);
    const std::size_t per_ch = x.size() / ch;
    if (mode == Mode::Train) {
        std::vector<double> mean(ch, 0.0), var(ch, 0.0);
        for (std::size_t i = 0; i < x.v.size(); ++i) mean[i % ch] += static_cast<double>(x.v[i]);
        for (int c = 0; c < ch; ++c) mean[c] /= static_cast<double>(per_ch);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const double d = static_cast<double>(x.v[i]) - mean[i % ch];
            var[i % ch] += d * d;
        }
        for (int c = 0; c < ch; ++c) var[c] /= static_cast<double>(per_ch);
        std::vector<T> inv_std(ch);
        for (int c = 0; c < ch; ++c)
            inv_std[c] = T(1) / std::sqrt(static_cast<T>(var[c]) + p.epsilon);
        if (cache) {
            cache->xhat = Tensor4T<T>(x.n, x.h, x.w, x.c);
            cache->inv_std = inv_std;
            cache->valid = true;
        }
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const int c = static_cast<int>(i % ch);
            const T xh = (x.v[i] - static_cast<T>(mean[c])) * inv_std[c];
            if (cache) cache->xhat.v[i] = xh;
            y.v[i] = p.gamma[c] * xh + p.beta[c];
        }
        for (int c = 0; c < ch; ++c) {
            p.running_mean[c] = (T(1) - p.momentum) * p.running_mean[c] + p.momentum * static_cast<T>(mean[c]);
            p.running_var[c] = (T(1) - p.momentum) * p.running_var[c] + p.momentum * static_cast<T>(var[c]);
        }
    } else {
        std::vector<T> scale(ch), shift(ch);
        for (int c = 0; c < ch; ++c) {
            scale[c] = p.gamma[c] / std::sqrt(p.running_var[c] + p.epsilon);
            shift[c] = p.beta[c] - scale[c] * p.running_mean[c];
        }
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const int c = static_cast<int>(i % ch);
            y.v[i] = scale[c] * x.v[i] + shift[c];
        }
        if (cache) cache->valid = false;
    }
    return y;
}

template <typename T>
Tensor4T<T> batch_norm_backward(const BnCacheT<T>& cache, const BatchNormParamsT<T>& p,
                                const Tensor4T<T>& dy, std::vector<T>& dgamma,
                                std::vector<T>& dbeta) {
    if (!cache.valid) throw ShapeError("batch_norm_backward: requires a train-mode forward cache");
    require_same_dims(cache.xhat, dy, "batch_norm_backward");
    const int ch = p.channels();
    const std::size_t per_ch = dy.size() / ch;
    dgamma.assign(ch, T(0));
    dbeta.assign(ch, T(0));
    std::vector<double> sum_dy(ch, 0.0), sum_dy_xh(ch, 0.0);
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
        const int c = static_cast<int>(i % ch);
        sum_dy[c] += static_cast<double>(dy.v[i]);
        sum_dy_xh[c] += static_cast<double>(dy.v[i]) * static_cast<double>(cache.xhat.v[i]);
    }
    for (int c = 0; c < ch; ++c) {
        dbeta[c] = static_cast<T>(sum_dy[c]);
        dgamma[c] = static_cast<T>(sum_dy_xh[c]);
    }
    Tensor4T<T> dx(dy.n, dy.h, dy.w, dy.c);
    const T inv_n = T(1) / static_cast<T>(per_ch);
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
        const int c = static_cast<int>(i % ch);
        dx.v[i] = p.gamma[c] * cache.inv_std[c] *
                  (dy.v[i] - static_cast<T>(sum_dy[c]) * inv_n -
                   cache.xhat.v[i] * static_cast<T>(sum_dy_xh[c]) * inv_n);
    }
    return dx;
}

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); inference is the identity.
template <typename T>
Tensor4T<T> dropout(const Tensor4T<T>& x, T rate, Mode mode, Rng* rng,
                    std::vector<std::uint8_t>* mask_out = nullptr) {
    if (!(rate >= T(0) && rate < T(1))) throw ParamError("dropout: rate must be in [0,1)");
    if (mode == Mode::Infer || rate == T(0)) {
        if (mask_out) mask_out->assign(x.size(), 1);
        return x;
    }
    if (!rng) throw ParamError("dropout: train mode requires a seeded generator");
    Tensor4T<T> y = x;
    if (mask_out) mask_out->assign(x.size(), 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const T scale = T(1) / (T(1) - rate);
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        if (uni(*rng) < static_cast<double>(rate)) {
            y.v[i] = T(0);
            if (mask_out) (*mask_out)[i] = 0;
        } else {
            y.v[i] *= scale;
        }
    }
    return y;
}

template <typename T>
Tensor4T<T> dropout_backward(const Tensor4T<T>& dy, const std::vector<std::uint8_t>& mask, T rate) {
    if (mask.size() != dy.size()) throw ShapeError("dropout_backward: mask cache size mismatch");
    Tensor4T<T> dx = dy;
    const T scale = T(1) / (T(1) - rate);
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] = mask[i] ? dx.v[i] * scale : T(0);
    return dx;
}

// ---- layer objects (parameters + forward cache, for stacking) ----

template <typename T>
struct ParamSlot {
    std::string name;
    std::vector<int> shape;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;  // null for non-trainable state (running stats)

    bool trainable() const { return grad != nullptr; }
    std::size_t count() const { return value->size(); }
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor4T<T> forward(const Tensor4T<T>& x, Mode mode, Rng* rng) = 0;
    virtual Tensor4T<T> backward(const Tensor4T<T>& dy) = 0;
    virtual void collect(std::vector<ParamSlot<T>>&, const std::string&, bool) {}
    virtual const char* kind() const = 0;
};

template <typename T>
class Conv2dLayer : public Layer<T> {
public:
    explicit Conv2dLayer(ConvParamsT<T> p) : p_(std::move(p)) { p_.validate(); }

    Tensor4T<T> forward(const Tensor4T<T>& x, Mode, Rng*) override {
        x_ = x;
        return conv2d(x, p_);
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override {
        if (x_.size() == 0) throw ShapeError("conv backward: no cached forward input");
        Tensor4T<T> dx;
        conv2d_backward(x_, p_, dy, dx, dw_, db_);
        return dx;
    }
    void collect(std::vector<ParamSlot<T>>& out, const std::string& prefix, bool) override {
        if (dw_.size() != p_.w.size()) dw_.assign(p_.w.size(), T(0));
        if (db_.size() != p_.b.size()) db_.assign(p_.b.size(), T(0));
        out.push_back({prefix + ".weight", {p_.k, p_.k, p_.in_ch, p_.out_ch}, &p_.w, &dw_});
        out.push_back({prefix + ".bias", {p_.out_ch}, &p_.b, &db_});
    }
    const char* kind() const override { return "conv"; }
    ConvParamsT<T>& params() { return p_; }

private:
    ConvParamsT<T> p_;
    std::vector<T> dw_, db_;
    Tensor4T<T> x_;
};

template <typename T>
class BatchNormLayer : public Layer<T> {
public:
    explicit BatchNormLayer(BatchNormParamsT<T> p) : p_(std::move(p)) { p_.validate(); }

    Tensor4T<T> forward(const Tensor4T<T>& x, Mode mode, Rng*) override {
        return batch_norm(x, p_, mode, &cache_);
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override {
        return batch_norm_backward(cache_, p_, dy, dgamma_, dbeta_);
    }
    void collect(std::vector<ParamSlot<T>>& out, const std::string& prefix, bool include_state) override {
        const int ch = p_.channels();
        if (dgamma_.size() != p_.gamma.size()) dgamma_.assign(ch, T(0));
        if (dbeta_.size() != p_.beta.size()) dbeta_.assign(ch, T(0));
        out.push_back({prefix + ".gamma", {ch}, &p_.gamma, &dgamma_});
        out.push_back({prefix + ".beta", {ch}, &p_.beta, &dbeta_});
        if (include_state) {
            out.push_back({prefix + ".running_mean", {ch}, &p_.running_mean, nullptr});
            out.push_back({prefix + ".running_var", {ch}, &p_.running_var, nullptr});
        }
    }
    const char* kind() const override { return "batch_norm"; }
    BatchNormParamsT<T>& params() { return p_; }

private:
    BatchNormParamsT<T> p_;
    BnCacheT<T> cache_;
    std::vector<T> dgamma_, dbeta_;
};

template <typename T>
class LeakyReluLayer : public Layer<T> {
public:
    Tensor4T<T> forward(const Tensor4T<T>& x, Mode, Rng*) override {
        x_ = x;
        return leaky_relu(x);
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override { return leaky_relu_backward(x_, dy); }
    const char* kind() const override { return "leaky_relu"; }

private:
    Tensor4T<T> x_;
};

template <typename T>
class SigmoidLayer : public Layer<T> {
public:
    Tensor4T<T> forward(const Tensor4T<T>& x, Mode, Rng*) override {
        y_ = sigmoid(x);
        return y_;
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override { return sigmoid_backward(y_, dy); }
    const char* kind() const override { return "sigmoid"; }

private:
    Tensor4T<T> y_;
};

template <typename T>
class MaxPool2Layer : public Layer<T> {
public:
    Tensor4T<T> forward(const Tensor4T<T>& x, Mode, Rng*) override {
        in_n_ = x.n; in_h_ = x.h; in_w_ = x.w; in_c_ = x.c;
        return max_pool2(x, &argmax_);
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override {
        return max_pool2_backward(dy, argmax_, in_n_, in_h_, in_w_, in_c_);
    }
    const char* kind() const override { return "max_pool"; }

private:
    std::vector<std::size_t> argmax_;
    int in_n_ = 0, in_h_ = 0, in_w_ = 0, in_c_ = 0;
};

template <typename T>
class DropoutLayer : public Layer<T> {
public:
    explicit DropoutLayer(T rate) : rate_(rate) {
        if (!(rate >= T(0) && rate < T(1))) throw ParamError("dropout: rate must be in [0,1)");
    }
    Tensor4T<T> forward(const Tensor4T<T>& x, Mode mode, Rng* rng) override {
        return dropout(x, rate_, mode, rng, &mask_);
    }
    Tensor4T<T> backward(const Tensor4T<T>& dy) override {
        return dropout_backward(dy, mask_, rate_);
    }
    const char* kind() const override { return "dropout"; }
    T rate() const { return rate_; }

private:
    T rate_;
    std::vector<std::uint8_t> mask_;
};

// Ordered layer pipeline with shared forward/backward plumbing.
template <typename T>
class LayerStack {
public:
    std::vector<std::unique_ptr<Layer<T>>> layers;

    Tensor4T<T> forward(const Tensor4T<T>& x, Mode mode, Rng* rng = nullptr) {
        Tensor4T<T> cur = x;
        for (auto& l : layers) cur = l->forward(cur, mode, rng);
        return cur;
    }

    // Upstream gradient w.r.t. the stack output; returns gradient w.r.t. the
    // input. Parameter gradients land in each layer's slots.
    Tensor4T<T> backward(const Tensor4T<T>& dy) {
        Tensor4T<T> cur = dy;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    std::vector<ParamSlot<T>> param_slots(bool include_state = false) {
        std::vector<ParamSlot<T>> out;
        int conv_i = 0, bn_i = 0;
        for (auto& l : layers) {
            std::string prefix = l->kind();
            if (prefix == "conv") prefix += std::to_string(++conv_i);
            else if (prefix == "batch_norm") prefix = "bn" + std::to_string(++bn_i);
            l->collect(out, prefix, include_state);
        }
        return out;
    }

    void zero_grad() {
        for (auto& s : param_slots())
            if (s.grad) std::fill(s.grad->begin(), s.grad->end(), T(0));
    }
};

// Momentum SGD: v <- momentum*v + grad; param <- param - lr*v.
template <typename T>
class SgdOptimizer {
public:
    void step(std::vector<ParamSlot<T>>& slots, T lr, T momentum) {
        if (!(lr >= T(0))) throw ParamError("sgd: lr must be >= 0");
        if (!(momentum >= T(0) && momentum < T(1))) throw ParamError("sgd: momentum must be in [0,1)");
        if (vel_.empty()) {
            for (auto& s : slots) vel_.emplace_back(s.value->size(), T(0));
        }
        if (vel_.size() != slots.size()) throw ShapeError("sgd: slot count changed");
        for (std::size_t i = 0; i < slots.size(); ++i) {
            auto& s = slots[i];
            if (!s.grad) continue;
            if (s.grad->size() != s.value->size() || vel_[i].size() != s.value->size())
                throw ShapeError("sgd: gradient shape mismatch on " + s.name);
            auto& v = vel_[i];
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = momentum * v[j] + (*s.grad)[j];
                (*s.value)[j] -= lr * v[j];
            }
        }
    }

private:
    std::vector<std::vector<T>> vel_;
};

}  // namespace drip::nn
