#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "erfd/clip.hpp"
#include "erfd/nn/densenet.hpp"

namespace erfd::nn {

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 20;
    double lr = 0.00075;
    int lr_decay_every = 200;
    double lr_decay_factor = 0.5;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

/// Step decay: lr * factor^floor(epoch / every), epochs counted from 0.
double learning_rate(const TrainConfig& cfg, int epoch);

class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    void step(const std::vector<Parameter*>& params, double lr);
    long steps() const { return t_; }

private:
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_auc = 0.0;  // NaN when the validation set lacks a class
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on softmax cross-entropy. The model must already be
/// initialized; batches are drawn from a generator seeded by cfg.seed.
std::vector<EpochRecord> train(DenseNet3d& model, const std::vector<ClipTensor>& train_set,
                               const std::vector<ClipTensor>& val_set, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

/// Stacks clips [first, first + count) of `order` into one batch tensor.
Tensor5 make_batch(const std::vector<ClipTensor>& clips, const std::vector<std::size_t>& order,
                   std::size_t first, std::size_t count);

/// Eval-mode probability of class 1 (fake) per clip.
std::vector<double> predict(DenseNet3d& model, const std::vector<ClipTensor>& clips,
                            int batch_size = 20);

class UndefinedAuc : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// P(score_pos > score_neg) + 0.5 P(tie) over all positive/negative pairs.
double evaluate_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Metrics {
    double auc = 0.0;
    double accuracy = 0.0;  // threshold 0.5 on the fake probability
    int true_positive = 0;
    int true_negative = 0;
    int false_positive = 0;
    int false_negative = 0;
};

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace erfd::nn
