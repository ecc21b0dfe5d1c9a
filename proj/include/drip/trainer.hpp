#pragma once

// Training on labeled datasets: grid cross-entropy, seeded 80/20 split,
// per-epoch history, best-validation checkpointing, and accuracy metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drip/dropnet.hpp"
#include "drip/synth.hpp"

namespace drip {

// BceFull is the well-posed default; PaperPrinted is the nonnegated
// sum of Y*log(Yhat) only, kept for ablation.
enum class LossVariant { BceFull, PaperPrinted };

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    float lr = 0.01f;
    float momentum = 0.9f;
    float split_ratio = 0.8f;  // train share
    std::uint32_t seed = 1;
    LossVariant loss_variant = LossVariant::BceFull;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_state_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
    int best_epoch = 0;  // epoch whose weights the net carries afterwards
};

struct Metrics {
    double state_accuracy = 0.0;
    double cell_accuracy = 0.0;  // argmax cell within the label cell's 8-neighborhood
};

// Cross-entropy over all S*S*2 cells with predictions clamped to
// [1e-7, 1-1e-7]. Summed, not averaged.
double loss(const GridLabel& Y, const OutputGrid& Yhat);

constexpr double kLossClamp = 1e-7;

// Same loss over raw (n,S,S,2) activation tensors, summed over the batch.
template <typename T>
double loss_tensor(const Tensor4T<T>& target, const Tensor4T<T>& yhat, LossVariant variant) {
    require_same_dims(target, yhat, "loss");
    double sum = 0.0;
    for (std::size_t idx = 0; idx < yhat.v.size(); ++idx) {
        const double c = std::clamp(double(yhat.v[idx]), kLossClamp, 1.0 - kLossClamp);
        const double t = double(target.v[idx]);
        if (variant == LossVariant::PaperPrinted)
            sum += t * std::log(c);
        else
            sum -= t * std::log(c) + (1.0 - t) * std::log(1.0 - c);
    }
    return sum;
}

// d(loss)/d(yhat), evaluated at the clamped prediction, scaled by `scale`.
template <typename T>
Tensor4T<T> loss_grad_tensor(const Tensor4T<T>& target, const Tensor4T<T>& yhat,
                             LossVariant variant, double scale = 1.0) {
    require_same_dims(target, yhat, "loss_grad");
    Tensor4T<T> dy(yhat.n, yhat.h, yhat.w, yhat.c);
    for (std::size_t idx = 0; idx < yhat.v.size(); ++idx) {
        const double c = std::clamp(double(yhat.v[idx]), kLossClamp, 1.0 - kLossClamp);
        const double t = double(target.v[idx]);
        const double g = variant == LossVariant::PaperPrinted
                             ? t / c
                             : -(t / c) + (1.0 - t) / (1.0 - c);
        dy.v[idx] = T(g * scale);
    }
    return dy;
}

// Label tensor in network-output order: rows are y cells, columns x cells.
Tensor4 label_tensor(const std::vector<ManifestEntry>& entries,
                     const std::vector<int>& indices, int S);

// Seeded shuffle split, dropout and batch order drawn from cfg.seed. The net
// is left holding the weights of the best-validation-loss epoch.
TrainHistory train(DropNet& net, const std::string& dir,
                   const std::vector<ManifestEntry>& entries, const TrainConfig& cfg);

Metrics evaluate(DropNet& net, const std::string& dir,
                 const std::vector<ManifestEntry>& entries);

void write_history_csv(const TrainHistory& h, const std::string& path);

}  // namespace drip
