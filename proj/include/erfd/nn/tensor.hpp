#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace erfd::nn {

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense (batch, channel, depth, height, width) tensor in C order.
class Tensor5 {
public:
    using Dims = std::array<int, 5>;

    Tensor5() = default;
    explicit Tensor5(Dims dims, double fill = 0.0);
    Tensor5(Dims dims, std::vector<double> data);

    const Dims& dims() const { return dims_; }
    int batch() const { return dims_[0]; }
    int channels() const { return dims_[1]; }
    int depth() const { return dims_[2]; }
    int height() const { return dims_[3]; }
    int width() const { return dims_[4]; }

    std::size_t size() const { return data_.size(); }
    std::size_t spatial() const {
        return static_cast<std::size_t>(dims_[2]) * dims_[3] * dims_[4];
    }
    /// Elements per batch entry.
    std::size_t sample_size() const { return static_cast<std::size_t>(dims_[1]) * spatial(); }

    std::size_t index(int n, int c, int d, int h, int w) const {
        return (((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + d) * dims_[3] + h) *
                   dims_[4] +
               w;
    }
    double& at(int n, int c, int d, int h, int w) { return data_[index(n, c, d, h, w)]; }
    double at(int n, int c, int d, int h, int w) const { return data_[index(n, c, d, h, w)]; }

    double* sample(int n) { return data_.data() + n * sample_size(); }
    const double* sample(int n) const { return data_.data() + n * sample_size(); }
    /// Start of channel c of batch entry n.
    double* plane(int n, int c) { return data_.data() + index(n, c, 0, 0, 0); }
    const double* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0, 0); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v);
    bool all_finite() const;

private:
    Dims dims_{0, 0, 0, 0, 0};
    std::vector<double> data_;
};

std::string dims_string(const Tensor5::Dims& dims);

/// Channel-wise concatenation [a, b].
Tensor5 concat_channels(const Tensor5& a, const Tensor5& b);
/// Channels [first, first + count).
Tensor5 slice_channels(const Tensor5& x, int first, int count);

/// Debug builds verify every layer output is finite.
void debug_check_finite(const Tensor5& t, const char* where);

}  // namespace erfd::nn
