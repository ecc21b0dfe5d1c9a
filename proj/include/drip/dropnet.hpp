#pragma once

// The drop-state network: a stack of 5x5 conv / batch-norm / leaky-ReLU /
// max-pool stages topped by a 1x1 conv + sigmoid that emits an SxSx2 grid of
// per-cell (position, state) activations.

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "drip/layers.hpp"
#include "drip/tensor.hpp"

namespace drip {

struct LayerSpec {
    enum class Kind { Conv, BatchNorm, LeakyRelu, Sigmoid, MaxPool, Dropout };
    Kind kind = Kind::Conv;
    int kernel = 0, in_ch = 0, out_ch = 0;  // conv only
    float rate = 0.0f;                      // dropout only

    static LayerSpec conv(int k, int in, int out) { return {Kind::Conv, k, in, out, 0.0f}; }
    static LayerSpec batch_norm() { return {Kind::BatchNorm, 0, 0, 0, 0.0f}; }
    static LayerSpec leaky_relu() { return {Kind::LeakyRelu, 0, 0, 0, 0.0f}; }
    static LayerSpec sigmoid() { return {Kind::Sigmoid, 0, 0, 0, 0.0f}; }
    static LayerSpec max_pool() { return {Kind::MaxPool, 0, 0, 0, 0.0f}; }
    static LayerSpec dropout(float rate) { return {Kind::Dropout, 0, 0, 0, rate}; }

    bool operator==(const LayerSpec&) const = default;
};

struct NetConfig {
    int input_size = 416;  // W
    int grid_size = 26;    // S
    std::uint32_t seed = 1;
    std::vector<LayerSpec> layers;

    // Full-scale stack: 5x5 convs 3-16-32-64-128-256 with BN/LReLU, four
    // pools, dropout 0.2 on the two deepest stages, 1x1 conv to 2 + sigmoid.
    static NetConfig reference(std::uint32_t seed = 1);
    // Same shape at W=128, S=8 with channels 6-12-24-48-64 for fast CPU runs.
    static NetConfig desk(std::uint32_t seed = 1);

    // Throws ConfigError naming the violated rule.
    void validate() const;

    nlohmann::json to_json() const;
    static NetConfig from_json(const nlohmann::json& j);

    bool operator==(const NetConfig&) const = default;
};

// One frame's network output: S x S x 2 activations, each in (0,1).
struct OutputGrid {
    int S = 0;
    std::vector<float> v;

    OutputGrid() = default;
    explicit OutputGrid(int s) : S(s), v(static_cast<std::size_t>(s) * s * 2, 0.0f) {}

    float at(int i, int j, int k) const { return v[(static_cast<std::size_t>(i) * S + j) * 2 + k]; }
    float& at(int i, int j, int k) { return v[(static_cast<std::size_t>(i) * S + j) * 2 + k]; }
};

template <typename T>
class DropNetT {
public:
    static DropNetT build(const NetConfig& cfg) {
        cfg.validate();
        DropNetT net;
        net.cfg_ = cfg;
        Rng rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        int channels = 3;
        for (const auto& spec : cfg.layers) {
            switch (spec.kind) {
                case LayerSpec::Kind::Conv: {
                    nn::ConvParamsT<T> p;
                    p.k = spec.kernel;
                    p.in_ch = spec.in_ch;
                    p.out_ch = spec.out_ch;
                    const double he_std = std::sqrt(2.0 / (spec.kernel * spec.kernel * spec.in_ch));
                    p.w.resize(static_cast<std::size_t>(spec.kernel) * spec.kernel * spec.in_ch * spec.out_ch);
                    for (T& w : p.w) w = static_cast<T>(normal(rng) * he_std);
                    p.b.assign(spec.out_ch, T(0));
                    net.stack_.layers.push_back(std::make_unique<nn::Conv2dLayer<T>>(std::move(p)));
                    channels = spec.out_ch;
                    break;
                }
                case LayerSpec::Kind::BatchNorm:
                    net.stack_.layers.push_back(std::make_unique<nn::BatchNormLayer<T>>(
                        nn::BatchNormParamsT<T>::identity(channels)));
                    break;
                case LayerSpec::Kind::LeakyRelu:
                    net.stack_.layers.push_back(std::make_unique<nn::LeakyReluLayer<T>>());
                    break;
                case LayerSpec::Kind::Sigmoid:
                    net.stack_.layers.push_back(std::make_unique<nn::SigmoidLayer<T>>());
                    break;
                case LayerSpec::Kind::MaxPool:
                    net.stack_.layers.push_back(std::make_unique<nn::MaxPool2Layer<T>>());
                    break;
                case LayerSpec::Kind::Dropout:
                    net.stack_.layers.push_back(std::make_unique<nn::DropoutLayer<T>>(static_cast<T>(spec.rate)));
                    break;
            }
        }
        return net;
    }

    // Raw (n, S, S, 2) activations. Frames must be (n, W, W, 3) in [0,1].
    Tensor4T<T> forward_raw(const Tensor4T<T>& frames, Mode mode, Rng* rng = nullptr) {
        if (frames.h != cfg_.input_size || frames.w != cfg_.input_size || frames.c != 3)
            throw ShapeError("forward: frames must be (n, W, W, 3) with W = " +
                             std::to_string(cfg_.input_size));
        // inference rows are independent (BN uses running stats), so every
        // batch size runs the same sample-major loop: inter-layer tensors
        // keep the single-frame cache footprint, per-frame work is identical
        // at any batch size, and the result is bit-identical to a batched
        // pass through the stack
        if (mode == Mode::Infer) {
            const std::size_t in_stride = frames.size() / frames.n;
            Tensor4T<T> one(1, frames.h, frames.w, frames.c);
            Tensor4T<T> out;
            for (int s = 0; s < frames.n; ++s) {
                std::copy(frames.v.begin() + s * in_stride,
                          frames.v.begin() + (s + 1) * in_stride, one.v.begin());
                const Tensor4T<T> y = stack_.forward(one, mode, rng);
                if (s == 0) out = Tensor4T<T>(frames.n, y.h, y.w, y.c);
                std::copy(y.v.begin(), y.v.end(),
                          out.v.begin() + static_cast<std::size_t>(s) * y.size());
            }
            return out;
        }
        return stack_.forward(frames, mode, rng);
    }

    // Inference: one grid per frame, dropout bypassed, running BN stats.
    std::vector<OutputGrid> forward(const Tensor4T<T>& frames) {
        const Tensor4T<T> out = forward_raw(frames, Mode::Infer);
        return grids_from_raw(out);
    }

    // Grid index i runs along x (tensor columns), j along y (tensor rows), so
    // the copy transposes. Values are re-clamped to the open unit interval in
    // case a double->float cast saturated.
    std::vector<OutputGrid> grids_from_raw(const Tensor4T<T>& out) const {
        const int S = cfg_.grid_size;
        std::vector<OutputGrid> grids(out.n, OutputGrid(S));
        constexpr float lo = std::numeric_limits<float>::min();
        const float hi = 1.0f - std::numeric_limits<float>::epsilon() / 2;
        for (int f = 0; f < out.n; ++f)
            for (int i = 0; i < S; ++i)
                for (int j = 0; j < S; ++j)
                    for (int k = 0; k < 2; ++k)
                        grids[f].at(i, j, k) =
                            std::clamp(static_cast<float>(out.at(f, j, i, k)), lo, hi);
        return grids;
    }

    // Trainable scalars: conv weights+biases, batch-norm gamma+beta.
    std::size_t param_count() {
        std::size_t total = 0;
        for (const auto& s : stack_.param_slots(false)) total += s.count();
        return total;
    }

    const NetConfig& config() const { return cfg_; }
    nn::LayerStack<T>& stack() { return stack_; }

private:
    NetConfig cfg_;
    nn::LayerStack<T> stack_;
};

using DropNet = DropNetT<float>;

// Bit-exact binary weight file ("DRPW", little-endian, CRC-32 trailer).
void save_weights(DropNet& net, const std::string& path);
DropNet load_weights(const std::string& path);

}  // namespace drip
