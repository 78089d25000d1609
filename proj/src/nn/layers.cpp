#include "erfd/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "erfd/parallel.hpp"

namespace erfd::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Output columns per GEMM tile; keeps the accumulator and the shifted input
// views cache resident across all kernel taps.
constexpr Eigen::Index kColumnTile = 64;

struct ConvGeometry {
    int cin, cout;
    int kd, kh, kw;
    int d, h, w;        // input extents
    int od, oh, ow;     // output extents
    int stride, pad;
};

ConvGeometry conv_geometry(const Tensor5& x, const Tensor5& weight, int stride, int padding) {
    const auto& wd = weight.dims();
    if (x.channels() != wd[1]) {
        throw ShapeError("conv3d: input has " + std::to_string(x.channels()) +
                         " channels, weight expects " + std::to_string(wd[1]));
    }
    if (wd[2] % 2 == 0 || wd[3] % 2 == 0 || wd[4] % 2 == 0) {
        throw ShapeError("conv3d: kernel extents must be odd");
    }
    if (stride < 1 || padding < 0) throw ShapeError("conv3d: invalid stride or padding");
    ConvGeometry g{wd[1], wd[0], wd[2], wd[3], wd[4], x.depth(), x.height(), x.width(),
                   0, 0, 0, stride, padding};
    g.od = conv_output_extent(g.d, g.kd, stride, padding);
    g.oh = conv_output_extent(g.h, g.kh, stride, padding);
    g.ow = conv_output_extent(g.w, g.kw, stride, padding);
    if (g.od < 1 || g.oh < 1 || g.ow < 1) throw ShapeError("conv3d: kernel larger than input");
    return g;
}

// Stride-1 convolution is evaluated on the zero-padded grid: every kernel
// offset becomes a contiguous column shift of the padded input, so the
// whole convolution is a sum of kd*kh*kw matrix products.
struct PaddedGrid {
    int dp, hp, wp;
    std::size_t np;       // padded voxels
    std::size_t columns;  // span of output positions on the padded grid
    std::vector<std::size_t> offsets;

    explicit PaddedGrid(const ConvGeometry& g)
        : dp(g.d + 2 * g.pad), hp(g.h + 2 * g.pad), wp(g.w + 2 * g.pad) {
        np = static_cast<std::size_t>(dp) * hp * wp;
        columns = (static_cast<std::size_t>(g.od) - 1) * hp * wp +
                  (static_cast<std::size_t>(g.oh) - 1) * wp + g.ow;
        for (int a = 0; a < g.kd; ++a)
            for (int b = 0; b < g.kh; ++b)
                for (int c = 0; c < g.kw; ++c)
                    offsets.push_back((static_cast<std::size_t>(a) * hp + b) * wp + c);
    }

    std::size_t at(int d, int h, int w) const {
        return (static_cast<std::size_t>(d) * hp + h) * wp + w;
    }
};

RowMat pad_sample(const Tensor5& x, int n, const ConvGeometry& g, const PaddedGrid& grid) {
    RowMat xp = RowMat::Zero(g.cin, static_cast<Eigen::Index>(grid.np));
    for (int c = 0; c < g.cin; ++c) {
        const double* src = x.plane(n, c);
        for (int d = 0; d < g.d; ++d) {
            for (int h = 0; h < g.h; ++h) {
                const std::size_t dst = grid.at(d + g.pad, h + g.pad, g.pad);
                std::copy(src, src + g.w, xp.row(c).data() + dst);
                src += g.w;
            }
        }
    }
    return xp;
}

std::vector<RowMat> offset_weights(const Tensor5& weight, const ConvGeometry& g) {
    const int taps = g.kd * g.kh * g.kw;
    std::vector<RowMat> mats(taps, RowMat(g.cout, g.cin));
    const auto& data = weight.data();
    for (int co = 0; co < g.cout; ++co)
        for (int ci = 0; ci < g.cin; ++ci)
            for (int o = 0; o < taps; ++o)
                mats[o](co, ci) = data[(static_cast<std::size_t>(co) * g.cin + ci) * taps + o];
    return mats;
}

void forward_sample_grid(const Tensor5& x, int n, const std::vector<RowMat>& wmats,
                         const ConvGeometry& g, Tensor5& y) {
    const PaddedGrid grid(g);
    const auto cols = static_cast<Eigen::Index>(grid.columns);
    RowMat padded;
    const double* xp_data;
    if (g.pad == 0) {
        xp_data = x.sample(n);
    } else {
        padded = pad_sample(x, n, g, grid);
        xp_data = padded.data();
    }
    const ConstRowMap xp(xp_data, g.cin, static_cast<Eigen::Index>(grid.np));

    if (g.pad == 0 && grid.offsets.size() == 1) {
        RowMap out(y.sample(n), g.cout, cols);
        out.noalias() = wmats[0] * xp;
        return;
    }
    RowMat full = RowMat::Zero(g.cout, cols);
    for (Eigen::Index c0 = 0; c0 < cols; c0 += kColumnTile) {
        const Eigen::Index n = std::min(kColumnTile, cols - c0);
        auto tile = full.middleCols(c0, n);
        for (std::size_t o = 0; o < grid.offsets.size(); ++o) {
            tile.noalias() += wmats[o] * xp.middleCols(c0 + static_cast<Eigen::Index>(grid.offsets[o]), n);
        }
    }
    for (int co = 0; co < g.cout; ++co) {
        double* dst = y.plane(n, co);
        for (int d = 0; d < g.od; ++d)
            for (int h = 0; h < g.oh; ++h) {
                const double* src = full.row(co).data() + grid.at(d, h, 0);
                dst = std::copy(src, src + g.ow, dst);
            }
    }
}

void forward_sample_direct(const Tensor5& x, int n, const Tensor5& weight, const ConvGeometry& g,
                           Tensor5& y) {
    for (int co = 0; co < g.cout; ++co)
        for (int od = 0; od < g.od; ++od)
            for (int oh = 0; oh < g.oh; ++oh)
                for (int ow = 0; ow < g.ow; ++ow) {
                    double acc = 0.0;
                    for (int ci = 0; ci < g.cin; ++ci)
                        for (int a = 0; a < g.kd; ++a) {
                            const int id = od * g.stride - g.pad + a;
                            if (id < 0 || id >= g.d) continue;
                            for (int b = 0; b < g.kh; ++b) {
                                const int ih = oh * g.stride - g.pad + b;
                                if (ih < 0 || ih >= g.h) continue;
                                for (int c = 0; c < g.kw; ++c) {
                                    const int iw = ow * g.stride - g.pad + c;
                                    if (iw < 0 || iw >= g.w) continue;
                                    acc += weight.at(co, ci, a, b, c) * x.at(n, ci, id, ih, iw);
                                }
                            }
                        }
                    y.at(n, co, od, oh, ow) = acc;
                }
}

}  // namespace

int conv_output_extent(int extent, int kernel, int stride, int padding) {
    return (extent + 2 * padding - kernel) / stride + 1;
}

Tensor5 conv3d_forward(const Tensor5& x, const Tensor5& weight, int stride, int padding,
                       int threads) {
    const ConvGeometry g = conv_geometry(x, weight, stride, padding);
    Tensor5 y({x.batch(), g.cout, g.od, g.oh, g.ow});
    if (stride == 1) {
        const auto wmats = offset_weights(weight, g);
        parallel_for(static_cast<std::size_t>(x.batch()), threads,
                     [&](std::size_t n) { forward_sample_grid(x, static_cast<int>(n), wmats, g, y); });
    } else {
        parallel_for(static_cast<std::size_t>(x.batch()), threads, [&](std::size_t n) {
            forward_sample_direct(x, static_cast<int>(n), weight, g, y);
        });
    }
    return y;
}

ConvGrads conv3d_backward(const Tensor5& x, const Tensor5& weight, const Tensor5& grad_out,
                          int stride, int padding, bool need_input_grad, int threads) {
    const ConvGeometry g = conv_geometry(x, weight, stride, padding);
    if (grad_out.dims() != Tensor5::Dims{x.batch(), g.cout, g.od, g.oh, g.ow}) {
        throw ShapeError("conv3d backward: gradient has dims " + dims_string(grad_out.dims()));
    }
    const int taps = g.kd * g.kh * g.kw;
    const auto batch = static_cast<std::size_t>(x.batch());
    ConvGrads grads;
    grads.weight = Tensor5(weight.dims());
    if (need_input_grad) grads.input = Tensor5(x.dims());

    // One weight-gradient buffer per sample, summed in sample order below.
    std::vector<std::vector<double>> per_sample(batch,
                                                std::vector<double>(weight.size(), 0.0));

    if (stride == 1) {
        const PaddedGrid grid(g);
        const auto cols = static_cast<Eigen::Index>(grid.columns);
        const auto np = static_cast<Eigen::Index>(grid.np);
        const auto wmats = offset_weights(weight, g);
        parallel_for(batch, threads, [&](std::size_t ns) {
            const int n = static_cast<int>(ns);
            RowMat padded;
            const double* xp_data;
            if (g.pad == 0) {
                xp_data = x.sample(n);
            } else {
                padded = pad_sample(x, n, g, grid);
                xp_data = padded.data();
            }
            const ConstRowMap xp(xp_data, g.cin, np);

            RowMat dfull = RowMat::Zero(g.cout, cols);
            for (int co = 0; co < g.cout; ++co) {
                const double* src = grad_out.plane(n, co);
                for (int d = 0; d < g.od; ++d)
                    for (int h = 0; h < g.oh; ++h) {
                        std::copy(src, src + g.ow, dfull.row(co).data() + grid.at(d, h, 0));
                        src += g.ow;
                    }
            }

            RowMat dxp;
            if (need_input_grad) dxp = RowMat::Zero(g.cin, np);
            std::vector<RowMat> tap_grads(taps, RowMat::Zero(g.cout, g.cin));
            for (Eigen::Index c0 = 0; c0 < cols; c0 += kColumnTile) {
                const Eigen::Index n = std::min(kColumnTile, cols - c0);
                const auto dtile = dfull.middleCols(c0, n);
                for (int o = 0; o < taps; ++o) {
                    const auto off = c0 + static_cast<Eigen::Index>(grid.offsets[o]);
                    tap_grads[o].noalias() += dtile * xp.middleCols(off, n).transpose();
                    if (need_input_grad) {
                        dxp.middleCols(off, n).noalias() += wmats[o].transpose() * dtile;
                    }
                }
            }
            auto& dw = per_sample[ns];
            for (int o = 0; o < taps; ++o)
                for (int co = 0; co < g.cout; ++co)
                    for (int ci = 0; ci < g.cin; ++ci)
                        dw[(static_cast<std::size_t>(co) * g.cin + ci) * taps + o] = tap_grads[o](co, ci);
            if (need_input_grad) {
                for (int c = 0; c < g.cin; ++c) {
                    double* dst = grads.input.plane(n, c);
                    for (int d = 0; d < g.d; ++d)
                        for (int h = 0; h < g.h; ++h) {
                            const double* src = dxp.row(c).data() + grid.at(d + g.pad, h + g.pad, g.pad);
                            dst = std::copy(src, src + g.w, dst);
                        }
                }
            }
        });
    } else {
        parallel_for(batch, threads, [&](std::size_t ns) {
            const int n = static_cast<int>(ns);
            auto& dw = per_sample[ns];
            for (int co = 0; co < g.cout; ++co)
                for (int od = 0; od < g.od; ++od)
                    for (int oh = 0; oh < g.oh; ++oh)
                        for (int ow = 0; ow < g.ow; ++ow) {
                            const double go = grad_out.at(n, co, od, oh, ow);
                            for (int ci = 0; ci < g.cin; ++ci)
                                for (int a = 0; a < g.kd; ++a) {
                                    const int id = od * g.stride - g.pad + a;
                                    if (id < 0 || id >= g.d) continue;
                                    for (int b = 0; b < g.kh; ++b) {
                                        const int ih = oh * g.stride - g.pad + b;
                                        if (ih < 0 || ih >= g.h) continue;
                                        for (int c = 0; c < g.kw; ++c) {
                                            const int iw = ow * g.stride - g.pad + c;
                                            if (iw < 0 || iw >= g.w) continue;
                                            dw[weight.index(co, ci, a, b, c)] +=
                                                go * x.at(n, ci, id, ih, iw);
                                            if (need_input_grad) {
                                                grads.input.at(n, ci, id, ih, iw) +=
                                                    go * weight.at(co, ci, a, b, c);
                                            }
                                        }
                                    }
                                }
                        }
        });
    }

    auto& wg = grads.weight.data();
    for (const auto& dw : per_sample)
        for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += dw[i];
    return grads;
}

Conv3d::Conv3d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int padding)
    : weight_(std::move(name) + ".weight", {out_channels, in_channels, kernel, kernel, kernel}),
      stride_(stride),
      padding_(padding) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
        throw ShapeError("conv3d: invalid configuration for " + weight_.name);
    }
}

void Conv3d::init(Rng& rng) {
    const auto& d = weight_.value.dims();
    const double fan_in = static_cast<double>(d[1]) * d[2] * d[3] * d[4];
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (auto& v : weight_.value.data()) v = std_dev * rng.normal();
}

Tensor5 Conv3d::forward(Tensor5 x) {
    input_ = std::move(x);
    Tensor5 y = conv3d_forward(input_, weight_.value, stride_, padding_, threads_);
    debug_check_finite(y, weight_.name.c_str());
    return y;
}

Tensor5 Conv3d::backward(const Tensor5& grad_out, bool need_input_grad) {
    ConvGrads g = conv3d_backward(input_, weight_.value, grad_out, stride_, padding_,
                                  need_input_grad, threads_);
    auto& acc = weight_.grad.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g.weight.data()[i];
    return std::move(g.input);
}

// ---------------------------------------------------------------------------

BatchNorm3d::BatchNorm3d(std::string name, int channels)
    : name_(std::move(name)),
      gamma_(name_ + ".gamma", {channels, 1, 1, 1, 1}),
      beta_(name_ + ".beta", {channels, 1, 1, 1, 1}),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {
    gamma_.value.fill(1.0);
}

void BatchNorm3d::collect_buffers(std::vector<Buffer>& buffers) {
    buffers.push_back({name_ + ".running_mean", &running_mean_});
    buffers.push_back({name_ + ".running_var", &running_var_});
}

Tensor5 BatchNorm3d::forward(const Tensor5& x, Mode mode) {
    const int channels = x.channels();
    if (channels != static_cast<int>(running_mean_.size())) {
        throw ShapeError(name_ + ": expected " + std::to_string(running_mean_.size()) +
                         " channels, got " + std::to_string(channels));
    }
    mode_ = mode;
    const std::size_t spatial = x.spatial();
    const double count = static_cast<double>(x.batch()) * static_cast<double>(spatial);
    Tensor5 y(x.dims());
    normalized_ = Tensor5(x.dims());
    inv_std_.assign(channels, 0.0);

    parallel_for(static_cast<std::size_t>(channels), threads_, [&](std::size_t cs) {
        const int c = static_cast<int>(cs);
        double mean;
        double var;
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (int n = 0; n < x.batch(); ++n) {
                const double* p = x.plane(n, c);
                for (std::size_t i = 0; i < spatial; ++i) sum += p[i];
            }
            mean = sum / count;
            double sq = 0.0;
            for (int n = 0; n < x.batch(); ++n) {
                const double* p = x.plane(n, c);
                for (std::size_t i = 0; i < spatial; ++i) sq += (p[i] - mean) * (p[i] - mean);
            }
            var = sq / count;
            const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
            running_mean_[c] = (1.0 - kMomentum) * running_mean_[c] + kMomentum * mean;
            running_var_[c] = (1.0 - kMomentum) * running_var_[c] + kMomentum * unbiased;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
        inv_std_[c] = inv_std;
        const double g = gamma_.value.data()[c];
        const double b = beta_.value.data()[c];
        for (int n = 0; n < x.batch(); ++n) {
            const double* p = x.plane(n, c);
            double* xh = normalized_.plane(n, c);
            double* out = y.plane(n, c);
            for (std::size_t i = 0; i < spatial; ++i) {
                xh[i] = (p[i] - mean) * inv_std;
                out[i] = g * xh[i] + b;
            }
        }
    });
    debug_check_finite(y, name_.c_str());
    return y;
}

Tensor5 BatchNorm3d::backward(const Tensor5& grad_out) {
    const int channels = grad_out.channels();
    const std::size_t spatial = grad_out.spatial();
    const double count = static_cast<double>(grad_out.batch()) * static_cast<double>(spatial);
    Tensor5 dx(grad_out.dims());
    parallel_for(static_cast<std::size_t>(channels), threads_, [&](std::size_t cs) {
        const int c = static_cast<int>(cs);
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (int n = 0; n < grad_out.batch(); ++n) {
            const double* dy = grad_out.plane(n, c);
            const double* xh = normalized_.plane(n, c);
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        gamma_.grad.data()[c] += sum_dy_xhat;
        beta_.grad.data()[c] += sum_dy;
        const double g = gamma_.value.data()[c];
        const double scale = g * inv_std_[c];
        for (int n = 0; n < grad_out.batch(); ++n) {
            const double* dy = grad_out.plane(n, c);
            const double* xh = normalized_.plane(n, c);
            double* out = dx.plane(n, c);
            if (mode_ == Mode::Train) {
                for (std::size_t i = 0; i < spatial; ++i) {
                    out[i] = scale * (dy[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
                }
            } else {
                for (std::size_t i = 0; i < spatial; ++i) out[i] = scale * dy[i];
            }
        }
    });
    return dx;
}

// ---------------------------------------------------------------------------

Tensor5 ReLU::forward(Tensor5 x) {
    auto& v = x.data();
    active_.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        active_[i] = v[i] > 0.0;
        if (v[i] < 0.0) v[i] = 0.0;  // NaN passes through, so divergence stays visible
    }
    return x;
}

Tensor5 ReLU::backward(Tensor5 grad_out) const {
    auto& g = grad_out.data();
    if (g.size() != active_.size()) throw ShapeError("relu backward: gradient size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = active_[i] ? g[i] : 0.0;
    return grad_out;
}

// ---------------------------------------------------------------------------

Tensor5 AvgPool3d::forward(const Tensor5& x) {
    input_dims_ = x.dims();
    skipped_axes_ = 0;
    for (int a = 0; a < 3; ++a) {
        kernel_[a] = input_dims_[2 + a] < 2 ? 1 : 2;
        if (kernel_[a] == 1) ++skipped_axes_;
    }
    const int od = x.depth() / kernel_[0];
    const int oh = x.height() / kernel_[1];
    const int ow = x.width() / kernel_[2];
    Tensor5 y({x.batch(), x.channels(), od, oh, ow});
    const double norm = 1.0 / (kernel_[0] * kernel_[1] * kernel_[2]);
    for (int n = 0; n < x.batch(); ++n)
        for (int c = 0; c < x.channels(); ++c)
            for (int d = 0; d < od; ++d)
                for (int h = 0; h < oh; ++h)
                    for (int w = 0; w < ow; ++w) {
                        double acc = 0.0;
                        for (int a = 0; a < kernel_[0]; ++a)
                            for (int b = 0; b < kernel_[1]; ++b)
                                for (int e = 0; e < kernel_[2]; ++e)
                                    acc += x.at(n, c, d * kernel_[0] + a, h * kernel_[1] + b,
                                                w * kernel_[2] + e);
                        y.at(n, c, d, h, w) = acc * norm;
                    }
    return y;
}

Tensor5 AvgPool3d::backward(const Tensor5& grad_out) const {
    Tensor5 dx(input_dims_);
    const double norm = 1.0 / (kernel_[0] * kernel_[1] * kernel_[2]);
    for (int n = 0; n < grad_out.batch(); ++n)
        for (int c = 0; c < grad_out.channels(); ++c)
            for (int d = 0; d < grad_out.depth(); ++d)
                for (int h = 0; h < grad_out.height(); ++h)
                    for (int w = 0; w < grad_out.width(); ++w) {
                        const double g = grad_out.at(n, c, d, h, w) * norm;
                        for (int a = 0; a < kernel_[0]; ++a)
                            for (int b = 0; b < kernel_[1]; ++b)
                                for (int e = 0; e < kernel_[2]; ++e)
                                    dx.at(n, c, d * kernel_[0] + a, h * kernel_[1] + b,
                                          w * kernel_[2] + e) = g;
                    }
    return dx;
}

// ---------------------------------------------------------------------------

Tensor5 GlobalAvgPool::forward(const Tensor5& x) {
    input_dims_ = x.dims();
    Tensor5 y({x.batch(), x.channels(), 1, 1, 1});
    const std::size_t spatial = x.spatial();
    for (int n = 0; n < x.batch(); ++n)
        for (int c = 0; c < x.channels(); ++c) {
            const double* p = x.plane(n, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < spatial; ++i) acc += p[i];
            y.at(n, c, 0, 0, 0) = acc / static_cast<double>(spatial);
        }
    return y;
}

Tensor5 GlobalAvgPool::backward(const Tensor5& grad_out) const {
    Tensor5 dx(input_dims_);
    const std::size_t spatial = dx.spatial();
    for (int n = 0; n < dx.batch(); ++n)
        for (int c = 0; c < dx.channels(); ++c) {
            const double g = grad_out.at(n, c, 0, 0, 0) / static_cast<double>(spatial);
            std::fill(dx.plane(n, c), dx.plane(n, c) + spatial, g);
        }
    return dx;
}

// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_features, int out_features)
    : weight_(name + ".weight", {out_features, in_features, 1, 1, 1}),
      bias_(name + ".bias", {out_features, 1, 1, 1, 1}) {}

void Linear::init(Rng& rng) {
    const double std_dev = std::sqrt(1.0 / weight_.value.channels());
    for (auto& v : weight_.value.data()) v = std_dev * rng.normal();
    bias_.value.fill(0.0);
}

Tensor5 Linear::forward(const Tensor5& x) {
    const int in = weight_.value.channels();
    const int out = weight_.value.batch();
    if (x.channels() != in || x.spatial() != 1) {
        throw ShapeError(weight_.name + ": expected (N, " + std::to_string(in) +
                         ", 1, 1, 1), got " + dims_string(x.dims()));
    }
    input_ = x;
    Tensor5 y({x.batch(), out, 1, 1, 1});
    for (int n = 0; n < x.batch(); ++n)
        for (int o = 0; o < out; ++o) {
            double acc = bias_.value.data()[o];
            for (int i = 0; i < in; ++i) acc += weight_.value.data()[o * in + i] * x.sample(n)[i];
            y.sample(n)[o] = acc;
        }
    return y;
}

Tensor5 Linear::backward(const Tensor5& grad_out) {
    const int in = weight_.value.channels();
    const int out = weight_.value.batch();
    Tensor5 dx(input_.dims());
    for (int n = 0; n < grad_out.batch(); ++n)
        for (int o = 0; o < out; ++o) {
            const double g = grad_out.sample(n)[o];
            bias_.grad.data()[o] += g;
            for (int i = 0; i < in; ++i) {
                weight_.grad.data()[o * in + i] += g * input_.sample(n)[i];
                dx.sample(n)[i] += g * weight_.value.data()[o * in + i];
            }
        }
    return dx;
}

// ---------------------------------------------------------------------------

Tensor5 softmax(const Tensor5& logits) {
    Tensor5 p(logits.dims());
    const int k = logits.channels();
    for (int n = 0; n < logits.batch(); ++n) {
        const double* z = logits.sample(n);
        double* out = p.sample(n);
        const double zmax = *std::max_element(z, z + k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            out[i] = std::exp(z[i] - zmax);
            sum += out[i];
        }
        for (int i = 0; i < k; ++i) out[i] /= sum;
    }
    return p;
}

LossResult softmax_cross_entropy(const Tensor5& logits, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != logits.batch()) {
        throw ShapeError("cross entropy: label count does not match batch");
    }
    const int k = logits.channels();
    LossResult r;
    r.grad = softmax(logits);
    const double inv_n = 1.0 / logits.batch();
    for (int n = 0; n < logits.batch(); ++n) {
        const int y = labels[n];
        if (y < 0 || y >= k) throw ShapeError("cross entropy: label out of range");
        const double* z = logits.sample(n);
        const double zmax = *std::max_element(z, z + k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) sum += std::exp(z[i] - zmax);
        r.loss += (std::log(sum) + zmax - z[y]) * inv_n;
        double* g = r.grad.sample(n);
        g[y] -= 1.0;
        for (int i = 0; i < k; ++i) g[i] *= inv_n;
    }
    return r;
}

}  // namespace erfd::nn
