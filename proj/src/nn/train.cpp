#include "erfd/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "erfd/random.hpp"

namespace erfd::nn {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (lr_decay_every < 1) throw std::invalid_argument("train config: lr_decay_every must be >= 1");
    if (!(lr_decay_factor > 0.0)) {
        throw std::invalid_argument("train config: lr_decay_factor must be positive");
    }
    if (threads < 1) throw std::invalid_argument("train config: threads must be >= 1");
}

double learning_rate(const TrainConfig& cfg, int epoch) {
    return cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

void Adam::step(const std::vector<Parameter*>& params, double lr) {
    if (m_.empty()) {
        for (const Parameter* p : params) {
            m_.emplace_back(p->value.size(), 0.0);
            v_.emplace_back(p->value.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& w = params[k]->value.data();
        const auto& g = params[k]->grad.data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEpsilon);
        }
    }
}

Tensor5 make_batch(const std::vector<ClipTensor>& clips, const std::vector<std::size_t>& order,
                   std::size_t first, std::size_t count) {
    const ClipTensor& ref = clips.at(order.at(first));
    Tensor5 x({static_cast<int>(count), ref.channels, ref.frames, kWindowSize, kDiffCount});
    for (std::size_t i = 0; i < count; ++i) {
        const ClipTensor& c = clips.at(order.at(first + i));
        if (c.channels != ref.channels || c.frames != ref.frames) {
            throw ShapeError("clip " + c.video_id + " has a different shape from " + ref.video_id);
        }
        std::copy(c.data.begin(), c.data.end(), x.sample(static_cast<int>(i)));
    }
    return x;
}

std::vector<EpochRecord> train(DenseNet3d& model, const std::vector<ClipTensor>& train_set,
                               const std::vector<ClipTensor>& val_set, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    for (const auto& c : train_set) {
        if (c.channels != model.config().in_channels) {
            throw ShapeError("train: clip " + c.video_id + " has " + std::to_string(c.channels) +
                             " channels, model expects " +
                             std::to_string(model.config().in_channels));
        }
    }
    model.set_threads(cfg.threads);
    const auto params = model.parameters();
    Adam adam;
    Rng rng(derive_seed(cfg.seed, fnv1a64("batch-order")));
    std::vector<int> val_labels;
    for (const auto& c : val_set) val_labels.push_back(c.label);

    std::vector<EpochRecord> history;
    std::vector<std::size_t> order(train_set.size());
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = learning_rate(cfg, epoch);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += batch) {
            const std::size_t count = std::min(batch, order.size() - first);
            Tensor5 x = make_batch(train_set, order, first, count);
            std::vector<int> labels;
            for (std::size_t i = 0; i < count; ++i) labels.push_back(train_set[order[first + i]].label);

            model.zero_grad();
            LossResult loss = softmax_cross_entropy(model.forward(x, Mode::Train), labels);
            if (!std::isfinite(loss.loss)) {
                std::ostringstream msg;
                msg << "training diverged: loss " << loss.loss << " at epoch " << epoch
                    << ", batch starting at " << first << " (lr " << rec.lr << ")";
                throw TrainingError(msg.str());
            }
            model.backward(loss.grad, /*need_input_grad=*/false);  // inputs are data
            adam.step(params, rec.lr);
            loss_sum += loss.loss * static_cast<double>(count);
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());

        rec.val_auc = std::numeric_limits<double>::quiet_NaN();
        const bool has_pos = std::count(val_labels.begin(), val_labels.end(), 1) > 0;
        const bool has_neg = std::count(val_labels.begin(), val_labels.end(), 0) > 0;
        if (has_pos && has_neg) {
            rec.val_auc = evaluate_auc(predict(model, val_set, cfg.batch_size), val_labels);
        }
        history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return history;
}

std::vector<double> predict(DenseNet3d& model, const std::vector<ClipTensor>& clips,
                            int batch_size) {
    std::vector<double> scores;
    scores.reserve(clips.size());
    std::vector<std::size_t> order(clips.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(std::max(batch_size, 1));
    for (std::size_t first = 0; first < clips.size(); first += batch) {
        const std::size_t count = std::min(batch, clips.size() - first);
        Tensor5 p = softmax(model.forward(make_batch(clips, order, first, count), Mode::Eval));
        for (std::size_t i = 0; i < count; ++i) scores.push_back(p.sample(static_cast<int>(i))[1]);
    }
    return scores;
}

double evaluate_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("auc: scores and labels differ in length");
    }
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            pos.push_back(scores[i]);
        } else if (labels[i] == 0) {
            neg.push_back(scores[i]);
        } else {
            throw std::invalid_argument("auc: labels must be 0 or 1");
        }
    }
    if (pos.empty() || neg.empty()) throw UndefinedAuc("auc is undefined with a single class");
    double wins = 0.0;
    for (double p : pos)
        for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
    Metrics m;
    m.auc = evaluate_auc(scores, labels);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted_fake = scores[i] >= 0.5;
        if (labels[i] == 1) {
            predicted_fake ? ++m.true_positive : ++m.false_negative;
        } else {
            predicted_fake ? ++m.false_positive : ++m.true_negative;
        }
    }
    m.accuracy = static_cast<double>(m.true_positive + m.true_negative) /
                 static_cast<double>(scores.size());
    return m;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,lr,train_loss,val_auc\n" << std::setprecision(17);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',';
        if (std::isnan(r.val_auc)) {
            out << "nan";
        } else {
            out << r.val_auc;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace erfd::nn
