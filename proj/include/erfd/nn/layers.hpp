#pragma once

#include <string>
#include <vector>

#include "erfd/nn/tensor.hpp"
#include "erfd/random.hpp"

namespace erfd::nn {

struct Parameter {
    std::string name;
    Tensor5 value;
    Tensor5 grad;

    Parameter() = default;
    Parameter(std::string name_, Tensor5::Dims dims)
        : name(std::move(name_)), value(dims), grad(dims) {}
};

/// Non-trainable state that still belongs in a checkpoint.
struct Buffer {
    std::string name;
    std::vector<double>* values = nullptr;
};

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// 3-D convolution (cross-correlation, no bias)

/// Weight dims are (out, in, kd, kh, kw); kernel extents must be odd.
Tensor5 conv3d_forward(const Tensor5& x, const Tensor5& weight, int stride, int padding,
                       int threads = 1);

struct ConvGrads {
    Tensor5 input;   // empty when not requested
    Tensor5 weight;
};

ConvGrads conv3d_backward(const Tensor5& x, const Tensor5& weight, const Tensor5& grad_out,
                          int stride, int padding, bool need_input_grad = true, int threads = 1);

int conv_output_extent(int extent, int kernel, int stride, int padding);

class Conv3d {
public:
    Conv3d() = default;
    Conv3d(std::string name, int in_channels, int out_channels, int kernel, int stride = 1,
           int padding = 0);

    /// Fan-in scaled normal initialization.
    void init(Rng& rng);

    /// Keeps `x` for the backward pass; pass an rvalue to avoid a copy.
    Tensor5 forward(Tensor5 x);
    Tensor5 backward(const Tensor5& grad_out, bool need_input_grad = true);

    int in_channels() const { return weight_.value.dims()[1]; }
    int out_channels() const { return weight_.value.dims()[0]; }
    Parameter& weight() { return weight_; }
    const Parameter& weight() const { return weight_; }
    void set_threads(int threads) { threads_ = threads; }
    void collect(std::vector<Parameter*>& params) { params.push_back(&weight_); }

private:
    Parameter weight_;
    int stride_ = 1;
    int padding_ = 0;
    int threads_ = 1;
    Tensor5 input_;
};

// ---------------------------------------------------------------------------

/// Per-channel normalization over (batch, depth, height, width).
class BatchNorm3d {
public:
    static constexpr double kEpsilon = 1e-5;
    static constexpr double kMomentum = 0.1;

    BatchNorm3d() = default;
    BatchNorm3d(std::string name, int channels);

    Tensor5 forward(const Tensor5& x, Mode mode);
    Tensor5 backward(const Tensor5& grad_out);

    /// Channels are independent, so they may be processed concurrently.
    void set_threads(int threads) { threads_ = threads; }
    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    std::vector<double>& running_mean() { return running_mean_; }
    std::vector<double>& running_var() { return running_var_; }
    void collect(std::vector<Parameter*>& params) {
        params.push_back(&gamma_);
        params.push_back(&beta_);
    }
    void collect_buffers(std::vector<Buffer>& buffers);

private:
    std::string name_;
    Parameter gamma_;
    Parameter beta_;
    std::vector<double> running_mean_;
    std::vector<double> running_var_;
    Mode mode_ = Mode::Train;
    int threads_ = 1;
    Tensor5 normalized_;
    std::vector<double> inv_std_;
};

/// Works in place on its by-value argument.
class ReLU {
public:
    Tensor5 forward(Tensor5 x);
    Tensor5 backward(Tensor5 grad_out) const;

private:
    std::vector<unsigned char> active_;
};

/// 2x2x2 average pooling with stride 2; odd extents are floored. Axes shorter
/// than 2 are left unpooled (`skipped_axes` reports them).
class AvgPool3d {
public:
    Tensor5 forward(const Tensor5& x);
    Tensor5 backward(const Tensor5& grad_out) const;
    int skipped_axes() const { return skipped_axes_; }

private:
    Tensor5::Dims input_dims_{};
    std::array<int, 3> kernel_{2, 2, 2};
    int skipped_axes_ = 0;
};

/// (N, C, D, H, W) -> (N, C, 1, 1, 1)
class GlobalAvgPool {
public:
    Tensor5 forward(const Tensor5& x);
    Tensor5 backward(const Tensor5& grad_out) const;

private:
    Tensor5::Dims input_dims_{};
};

/// Affine map on (N, C, 1, 1, 1) inputs.
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_features, int out_features);

    void init(Rng& rng);
    Tensor5 forward(const Tensor5& x);
    Tensor5 backward(const Tensor5& grad_out);

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    void collect(std::vector<Parameter*>& params) {
        params.push_back(&weight_);
        params.push_back(&bias_);
    }

private:
    Parameter weight_;  // (out, in, 1, 1, 1)
    Parameter bias_;    // (out, 1, 1, 1, 1)
    Tensor5 input_;
};

/// Row-wise softmax of (N, K, 1, 1, 1) logits.
Tensor5 softmax(const Tensor5& logits);

struct LossResult {
    double loss = 0.0;   // mean over the batch
    Tensor5 grad;        // d loss / d logits
};

LossResult softmax_cross_entropy(const Tensor5& logits, const std::vector<int>& labels);

}  // namespace erfd::nn
