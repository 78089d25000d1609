#include "erfd/nn/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace erfd::nn {

namespace {

std::size_t product(const Tensor5::Dims& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d < 0) throw ShapeError("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor5::Tensor5(Dims dims, double fill) : dims_(dims), data_(product(dims), fill) {}

Tensor5::Tensor5(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != product(dims_)) {
        throw ShapeError("tensor data length does not match " + dims_string(dims_));
    }
}

void Tensor5::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor5::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string dims_string(const Tensor5::Dims& dims) {
    std::string s = "(";
    for (int i = 0; i < 5; ++i) {
        if (i) s += ", ";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

Tensor5 concat_channels(const Tensor5& a, const Tensor5& b) {
    if (a.batch() != b.batch() || a.depth() != b.depth() || a.height() != b.height() ||
        a.width() != b.width()) {
        throw ShapeError("concat: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
    }
    Tensor5 out({a.batch(), a.channels() + b.channels(), a.depth(), a.height(), a.width()});
    for (int n = 0; n < a.batch(); ++n) {
        double* dst = out.sample(n);
        dst = std::copy(a.sample(n), a.sample(n) + a.sample_size(), dst);
        std::copy(b.sample(n), b.sample(n) + b.sample_size(), dst);
    }
    return out;
}

Tensor5 slice_channels(const Tensor5& x, int first, int count) {
    if (first < 0 || count < 0 || first + count > x.channels()) {
        throw ShapeError("slice_channels out of range");
    }
    Tensor5 out({x.batch(), count, x.depth(), x.height(), x.width()});
    const std::size_t len = static_cast<std::size_t>(count) * x.spatial();
    for (int n = 0; n < x.batch(); ++n) {
        const double* src = x.plane(n, first);
        std::copy(src, src + len, out.sample(n));
    }
    return out;
}

void debug_check_finite([[maybe_unused]] const Tensor5& t, [[maybe_unused]] const char* where) {
#ifndef NDEBUG
    if (!t.all_finite()) {
        throw std::runtime_error(std::string("non-finite values after ") + where);
    }
#endif
}

}  // namespace erfd::nn
