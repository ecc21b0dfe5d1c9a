#include "drip/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "drip/dripcount.hpp"
#include "drip/image.hpp"

namespace drip {

void TrainConfig::validate() const {
    if (epochs < 1) throw ParamError("train: epochs must be at least 1");
    if (batch_size < 1) throw ParamError("train: batch_size must be at least 1");
    if (!(split_ratio > 0.0f && split_ratio < 1.0f))
        throw ParamError("train: split_ratio must be inside (0,1)");
    if (!(lr >= 0.0f)) throw ParamError("train: lr must be nonnegative");
    if (!(momentum >= 0.0f && momentum < 1.0f)) throw ParamError("train: momentum outside [0,1)");
}

double loss(const GridLabel& Y, const OutputGrid& Yhat) {
    if (Y.S != Yhat.S) throw ShapeError("loss: grid sizes differ");
    const std::vector<float> dense = Y.dense();
    double sum = 0.0;
    for (std::size_t idx = 0; idx < dense.size(); ++idx) {
        const double c = std::clamp(double(Yhat.v[idx]), kLossClamp, 1.0 - kLossClamp);
        const double t = double(dense[idx]);
        sum -= t * std::log(c) + (1.0 - t) * std::log(1.0 - c);
    }
    return sum;
}

Tensor4 label_tensor(const std::vector<ManifestEntry>& entries, const std::vector<int>& indices,
                     int S) {
    Tensor4 target(int(indices.size()), S, S, 2);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const ManifestEntry& e = entries[indices[b]];
        const GridLabel l = make_label(e.x, e.y, e.s, e.W, e.S);
        target.at(int(b), l.j, l.i, l.k) = 1.0f;  // rows are y cells
    }
    return target;
}

namespace {

// Keeps decoded frames in memory when the whole set fits comfortably,
// otherwise re-reads per batch.
class FrameStore {
public:
    FrameStore(std::string dir, const std::vector<ManifestEntry>& entries)
        : dir_(std::move(dir)), entries_(entries) {
        const std::size_t W = entries.empty() ? 0 : std::size_t(entries[0].W);
        if (entries.size() * W * W * 3 <= std::size_t(1500) * 1000 * 1000) {
            cache_.reserve(entries.size());
            for (const auto& e : entries_) cache_.push_back(read_ppm(dir_ + "/" + e.file));
        }
    }

    void fill(Tensor4& x, int slot, int idx) const {
        const ImageU8 img =
            cache_.empty() ? read_ppm(dir_ + "/" + entries_[idx].file) : cache_[idx];
        if (img.h != x.h || img.w != x.w)
            throw ShapeError("train: frame size disagrees with the net input size");
        const std::size_t n = std::size_t(x.h) * x.w * 3;
        float* dst = x.v.data() + std::size_t(slot) * n;
        for (std::size_t p = 0; p < n; ++p) dst[p] = float(img.rgb[p]) / 255.0f;
    }

private:
    std::string dir_;
    const std::vector<ManifestEntry>& entries_;
    std::vector<ImageU8> cache_;
};

struct EvalTally {
    double loss_sum = 0.0;
    long n = 0;
    long state_correct = 0;
    long cell_correct = 0;
};

EvalTally eval_subset(DropNet& net, const FrameStore& store,
                      const std::vector<ManifestEntry>& entries, const std::vector<int>& idx,
                      int batch_size, LossVariant variant) {
    const int W = net.config().input_size, S = net.config().grid_size;
    EvalTally tally;
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const int bn = int(std::min<std::size_t>(batch_size, idx.size() - start));
        std::vector<int> batch(idx.begin() + start, idx.begin() + start + bn);
        Tensor4 x(bn, W, W, 3);
        for (int b = 0; b < bn; ++b) store.fill(x, b, batch[b]);
        const Tensor4 yhat = net.forward_raw(x, Mode::Infer);
        tally.loss_sum += loss_tensor(label_tensor(entries, batch, S), yhat, variant);
        const std::vector<OutputGrid> grids = net.grids_from_raw(yhat);
        for (int b = 0; b < bn; ++b) {
            const ManifestEntry& e = entries[batch[b]];
            const DropObservation obs = extract_observation(grids[b], 0.0, 0.5f);
            const GridLabel l = make_label(e.x, e.y, e.s, e.W, e.S);
            if (obs.s_hat == e.s) ++tally.state_correct;
            if (std::abs(obs.cell_i - l.i) <= 1 && std::abs(obs.cell_j - l.j) <= 1)
                ++tally.cell_correct;
            ++tally.n;
        }
    }
    return tally;
}

void check_entries(const DropNet& net, const std::vector<ManifestEntry>& entries) {
    if (entries.empty()) throw ParamError("dataset is empty");
    for (const auto& e : entries)
        if (e.W != net.config().input_size || e.S != net.config().grid_size)
            throw ConfigError("dataset geometry disagrees with the net config");
}

}  // namespace

TrainHistory train(DropNet& net, const std::string& dir,
                   const std::vector<ManifestEntry>& entries, const TrainConfig& cfg) {
    cfg.validate();
    check_entries(net, entries);
    const int W = net.config().input_size, S = net.config().grid_size;

    Rng rng(cfg.seed);
    std::vector<int> perm(entries.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = std::size_t(std::floor(double(entries.size()) * cfg.split_ratio));
    if (n_train == 0 || n_train == entries.size())
        throw ParamError("train: split leaves an empty side");
    std::vector<int> train_idx(perm.begin(), perm.begin() + n_train);
    const std::vector<int> val_idx(perm.begin() + n_train, perm.end());

    const FrameStore store(dir, entries);
    auto slots = net.stack().param_slots(false);
    nn::SgdOptimizer<float> opt;

    TrainHistory hist;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best_weights;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0.0;
        long seen = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const int bn = int(std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
            std::vector<int> batch(train_idx.begin() + start, train_idx.begin() + start + bn);
            Tensor4 x(bn, W, W, 3);
            for (int b = 0; b < bn; ++b) store.fill(x, b, batch[b]);
            const Tensor4 target = label_tensor(entries, batch, S);

            net.stack().zero_grad();
            const Tensor4 yhat = net.forward_raw(x, Mode::Train, &rng);
            const double l = loss_tensor(target, yhat, cfg.loss_variant);
            if (!std::isfinite(l))
                throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                         std::to_string(epoch) +
                                         " (learning rate likely too high)");
            loss_sum += l;
            seen += bn;
            net.stack().backward(loss_grad_tensor(target, yhat, cfg.loss_variant, 1.0 / bn));
            opt.step(slots, cfg.lr, cfg.momentum);
        }

        const EvalTally val =
            eval_subset(net, store, entries, val_idx, cfg.batch_size, cfg.loss_variant);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / double(seen);
        rec.val_loss = val.loss_sum / double(val.n);
        rec.val_state_acc = double(val.state_correct) / double(val.n);
        hist.records.push_back(rec);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            hist.best_epoch = epoch;
            best_weights.clear();
            for (const auto& s : net.stack().param_slots(true)) best_weights.push_back(*s.value);
        }
    }

    auto all = net.stack().param_slots(true);
    for (std::size_t i = 0; i < all.size(); ++i) *all[i].value = best_weights[i];
    return hist;
}

Metrics evaluate(DropNet& net, const std::string& dir,
                 const std::vector<ManifestEntry>& entries) {
    check_entries(net, entries);
    const FrameStore store(dir, entries);
    std::vector<int> idx(entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    const EvalTally t = eval_subset(net, store, entries, idx, 32, LossVariant::BceFull);
    return {double(t.state_correct) / double(t.n), double(t.cell_correct) / double(t.n)};
}

void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,train_loss,val_loss,val_state_acc\n";
    for (const auto& r : h.records)
        f << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_state_acc << "\n";
    if (!f) throw IoError("short write on " + path);
}

}  // namespace drip
