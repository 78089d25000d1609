#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "erfd/nn/layers.hpp"

namespace erfd::nn {

struct NetConfig {
    int growth_rate = 32;
    std::array<int, 3> block_sizes{6, 12, 8};
    int in_channels = 96;
    int bottleneck_factor = 4;
    double compression = 0.5;
    int classes = 2;
    std::array<int, 3> input_dims{24, 20, 19};  // frames, u, t

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

/// Channel and spatial extents at each stage boundary.
struct StagePlan {
    std::string name;
    int channels;
    std::array<int, 3> dims;
};

std::vector<StagePlan> channel_plan(const NetConfig& cfg);

/// BN -> ReLU -> 1x1x1 conv -> BN -> ReLU -> 3x3x3 conv, output appended to
/// the input along channels.
class DenseLayer {
public:
    DenseLayer(const std::string& name, int in_channels, int growth_rate, int bottleneck_factor);

    Tensor5 forward(const Tensor5& x, Mode mode);
    Tensor5 backward(const Tensor5& grad_out);

    Conv3d& conv1() { return conv1_; }
    Conv3d& conv2() { return conv2_; }
    void init(Rng& rng);
    void set_threads(int threads);
    void collect(std::vector<Parameter*>& params);
    void collect_buffers(std::vector<Buffer>& buffers);

private:
    int in_channels_;
    BatchNorm3d norm1_;
    ReLU relu1_;
    Conv3d conv1_;
    BatchNorm3d norm2_;
    ReLU relu2_;
    Conv3d conv2_;
};

class DenseBlock {
public:
    DenseBlock(const std::string& name, int in_channels, int layers, int growth_rate,
               int bottleneck_factor);

    Tensor5 forward(const Tensor5& x, Mode mode);
    Tensor5 backward(const Tensor5& grad_out);

    int out_channels() const { return out_channels_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    void init(Rng& rng);
    void set_threads(int threads);
    void collect(std::vector<Parameter*>& params);
    void collect_buffers(std::vector<Buffer>& buffers);

private:
    std::vector<DenseLayer> layers_;
    int out_channels_;
};

/// BN -> ReLU -> 1x1x1 conv to floor(compression * C) -> 2x2x2 average pool.
class Transition {
public:
    Transition(const std::string& name, int in_channels, double compression);

    Tensor5 forward(const Tensor5& x, Mode mode);
    Tensor5 backward(const Tensor5& grad_out);

    int out_channels() const { return conv_.out_channels(); }
    int skipped_axes() const { return pool_.skipped_axes(); }
    Conv3d& conv() { return conv_; }
    void init(Rng& rng);
    void set_threads(int threads) {
        norm_.set_threads(threads);
        conv_.set_threads(threads);
    }
    void collect(std::vector<Parameter*>& params);
    void collect_buffers(std::vector<Buffer>& buffers);

private:
    BatchNorm3d norm_;
    ReLU relu_;
    Conv3d conv_;
    AvgPool3d pool_;
};

class DenseNet3d {
public:
    explicit DenseNet3d(const NetConfig& cfg);

    const NetConfig& config() const { return cfg_; }

    /// Conv weights get fan-in scaled normals, biases zero, BN gamma 1 / beta 0.
    void init(std::uint64_t seed);

    /// (N, in_channels, frames, u, t) -> (N, classes, 1, 1, 1) logits.
    Tensor5 forward(const Tensor5& x, Mode mode);
    /// Accumulates parameter gradients. Returns the input gradient when requested.
    Tensor5 backward(const Tensor5& grad_logits, bool need_input_grad = false);

    void zero_grad();
    void set_threads(int threads);

    /// Stable order: stem, block1, transition1, block2, transition2, block3,
    /// norm_final, classifier.
    std::vector<Parameter*> parameters();
    std::vector<Buffer> buffers();

    DenseBlock& block(int i) { return blocks_.at(i); }
    Transition& transition(int i) { return transitions_.at(i); }
    /// Transitions that could not pool some axis.
    int skipped_pool_axes() const;

private:
    NetConfig cfg_;
    Conv3d stem_;
    std::vector<DenseBlock> blocks_;
    std::vector<Transition> transitions_;
    BatchNorm3d norm_final_;
    ReLU relu_final_;
    GlobalAvgPool gap_;
    Linear classifier_;
};

}  // namespace erfd::nn
