#include "erfd/nn/densenet.hpp"

#include <cmath>
#include <stdexcept>

namespace erfd::nn {

namespace {

int compressed(int channels, double compression) {
    return static_cast<int>(std::floor(compression * channels));
}

int pooled(int extent) { return extent < 2 ? extent : extent / 2; }

}  // namespace

void NetConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("net config: ") + what);
    };
    require(growth_rate >= 1, "growth_rate must be >= 1");
    for (int b : block_sizes) require(b >= 1, "block sizes must be >= 1");
    require(in_channels >= 1, "in_channels must be >= 1");
    require(bottleneck_factor >= 1, "bottleneck_factor must be >= 1");
    require(compression > 0.0 && compression <= 1.0, "compression must be in (0, 1]");
    require(classes == 2, "classes must be 2");
    for (int d : input_dims) require(d >= 1, "input dims must be >= 1");
    int channels = 2 * growth_rate;
    for (int b = 0; b < 2; ++b) {
        channels += block_sizes[b] * growth_rate;
        require(compressed(channels, compression) >= 1, "compression leaves no channels");
        channels = compressed(channels, compression);
    }
}

std::vector<StagePlan> channel_plan(const NetConfig& cfg) {
    cfg.validate();
    std::vector<StagePlan> plan;
    std::array<int, 3> dims = cfg.input_dims;
    plan.push_back({"input", cfg.in_channels, dims});
    int channels = 2 * cfg.growth_rate;
    plan.push_back({"stem", channels, dims});
    for (int b = 0; b < 3; ++b) {
        channels += cfg.block_sizes[b] * cfg.growth_rate;
        plan.push_back({"block" + std::to_string(b + 1), channels, dims});
        if (b < 2) {
            channels = compressed(channels, cfg.compression);
            for (auto& d : dims) d = pooled(d);
            plan.push_back({"transition" + std::to_string(b + 1), channels, dims});
        }
    }
    plan.push_back({"classifier", cfg.classes, {1, 1, 1}});
    return plan;
}

// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(const std::string& name, int in_channels, int growth_rate,
                       int bottleneck_factor)
    : in_channels_(in_channels),
      norm1_(name + ".norm1", in_channels),
      conv1_(name + ".conv1", in_channels, bottleneck_factor * growth_rate, 1),
      norm2_(name + ".norm2", bottleneck_factor * growth_rate),
      conv2_(name + ".conv2", bottleneck_factor * growth_rate, growth_rate, 3, 1, 1) {}

Tensor5 DenseLayer::forward(const Tensor5& x, Mode mode) {
    Tensor5 h = conv1_.forward(relu1_.forward(norm1_.forward(x, mode)));
    h = conv2_.forward(relu2_.forward(norm2_.forward(h, mode)));
    return concat_channels(x, h);
}

Tensor5 DenseLayer::backward(const Tensor5& grad_out) {
    Tensor5 g = slice_channels(grad_out, in_channels_, grad_out.channels() - in_channels_);
    g = norm2_.backward(relu2_.backward(conv2_.backward(g)));
    g = norm1_.backward(relu1_.backward(conv1_.backward(g)));
    Tensor5 dx = slice_channels(grad_out, 0, in_channels_);
    auto& out = dx.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g.data()[i];
    return dx;
}

void DenseLayer::init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
}

void DenseLayer::set_threads(int threads) {
    norm1_.set_threads(threads);
    conv1_.set_threads(threads);
    norm2_.set_threads(threads);
    conv2_.set_threads(threads);
}

void DenseLayer::collect(std::vector<Parameter*>& params) {
    norm1_.collect(params);
    conv1_.collect(params);
    norm2_.collect(params);
    conv2_.collect(params);
}

void DenseLayer::collect_buffers(std::vector<Buffer>& buffers) {
    norm1_.collect_buffers(buffers);
    norm2_.collect_buffers(buffers);
}

// ---------------------------------------------------------------------------

DenseBlock::DenseBlock(const std::string& name, int in_channels, int layers, int growth_rate,
                       int bottleneck_factor)
    : out_channels_(in_channels + layers * growth_rate) {
    layers_.reserve(layers);
    for (int i = 0; i < layers; ++i) {
        layers_.emplace_back(name + ".layer" + std::to_string(i + 1), in_channels + i * growth_rate,
                             growth_rate, bottleneck_factor);
    }
}

Tensor5 DenseBlock::forward(const Tensor5& x, Mode mode) {
    Tensor5 h = x;
    for (auto& layer : layers_) h = layer.forward(h, mode);
    return h;
}

Tensor5 DenseBlock::backward(const Tensor5& grad_out) {
    Tensor5 g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
    return g;
}

void DenseBlock::init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
}

void DenseBlock::set_threads(int threads) {
    for (auto& l : layers_) l.set_threads(threads);
}

void DenseBlock::collect(std::vector<Parameter*>& params) {
    for (auto& l : layers_) l.collect(params);
}

void DenseBlock::collect_buffers(std::vector<Buffer>& buffers) {
    for (auto& l : layers_) l.collect_buffers(buffers);
}

// ---------------------------------------------------------------------------

Transition::Transition(const std::string& name, int in_channels, double compression)
    : norm_(name + ".norm", in_channels),
      conv_(name + ".conv", in_channels, compressed(in_channels, compression), 1) {
    if (in_channels < 2) throw ShapeError(name + ": needs at least 2 input channels");
}

Tensor5 Transition::forward(const Tensor5& x, Mode mode) {
    return pool_.forward(conv_.forward(relu_.forward(norm_.forward(x, mode))));
}

Tensor5 Transition::backward(const Tensor5& grad_out) {
    return norm_.backward(relu_.backward(conv_.backward(pool_.backward(grad_out))));
}

void Transition::init(Rng& rng) { conv_.init(rng); }

void Transition::collect(std::vector<Parameter*>& params) {
    norm_.collect(params);
    conv_.collect(params);
}

void Transition::collect_buffers(std::vector<Buffer>& buffers) { norm_.collect_buffers(buffers); }

// ---------------------------------------------------------------------------

namespace {

const NetConfig& validated(const NetConfig& cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

DenseNet3d::DenseNet3d(const NetConfig& cfg)
    : cfg_(validated(cfg)),
      stem_("stem", cfg.in_channels, 2 * cfg.growth_rate, 3, 1, 1) {
    int channels = 2 * cfg.growth_rate;
    for (int b = 0; b < 3; ++b) {
        blocks_.emplace_back("block" + std::to_string(b + 1), channels, cfg.block_sizes[b],
                             cfg.growth_rate, cfg.bottleneck_factor);
        channels = blocks_.back().out_channels();
        if (b < 2) {
            transitions_.emplace_back("transition" + std::to_string(b + 1), channels,
                                      cfg.compression);
            channels = transitions_.back().out_channels();
        }
    }
    norm_final_ = BatchNorm3d("norm_final", channels);
    classifier_ = Linear("classifier", channels, cfg.classes);
}

void DenseNet3d::init(std::uint64_t seed) {
    Rng rng(seed);
    stem_.init(rng);
    for (int b = 0; b < 3; ++b) {
        blocks_[b].init(rng);
        if (b < 2) transitions_[b].init(rng);
    }
    classifier_.init(rng);
}

Tensor5 DenseNet3d::forward(const Tensor5& x, Mode mode) {
    const Tensor5::Dims expected{x.batch(), cfg_.in_channels, cfg_.input_dims[0],
                                 cfg_.input_dims[1], cfg_.input_dims[2]};
    if (x.batch() < 1 || x.dims() != expected) {
        throw ShapeError("model input " + dims_string(x.dims()) + " does not match " +
                         dims_string(expected));
    }
    Tensor5 h = stem_.forward(x);
    for (int b = 0; b < 3; ++b) {
        h = blocks_[b].forward(h, mode);
        if (b < 2) h = transitions_[b].forward(h, mode);
    }
    return classifier_.forward(gap_.forward(relu_final_.forward(norm_final_.forward(h, mode))));
}

Tensor5 DenseNet3d::backward(const Tensor5& grad_logits, bool need_input_grad) {
    Tensor5 g = gap_.backward(classifier_.backward(grad_logits));
    g = norm_final_.backward(relu_final_.backward(g));
    for (int b = 2; b >= 0; --b) {
        if (b < 2) g = transitions_[b].backward(g);
        g = blocks_[b].backward(g);
    }
    return stem_.backward(g, need_input_grad);
}

void DenseNet3d::zero_grad() {
    for (Parameter* p : parameters()) p->grad.fill(0.0);
}

void DenseNet3d::set_threads(int threads) {
    stem_.set_threads(threads);
    norm_final_.set_threads(threads);
    for (auto& b : blocks_) b.set_threads(threads);
    for (auto& t : transitions_) t.set_threads(threads);
}

std::vector<Parameter*> DenseNet3d::parameters() {
    std::vector<Parameter*> params;
    stem_.collect(params);
    for (int b = 0; b < 3; ++b) {
        blocks_[b].collect(params);
        if (b < 2) transitions_[b].collect(params);
    }
    norm_final_.collect(params);
    classifier_.collect(params);
    return params;
}

std::vector<Buffer> DenseNet3d::buffers() {
    std::vector<Buffer> buffers;
    for (int b = 0; b < 3; ++b) {
        blocks_[b].collect_buffers(buffers);
        if (b < 2) transitions_[b].collect_buffers(buffers);
    }
    norm_final_.collect_buffers(buffers);
    return buffers;
}

int DenseNet3d::skipped_pool_axes() const {
    int n = 0;
    for (const auto& t : transitions_) n += t.skipped_axes();
    return n;
}

}  // namespace erfd::nn
