#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace erfd {

/// Interleaved raster with real-valued samples in [0, 255].
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, int channels, double fill = 0.0);
    Raster(int width, int height, int channels, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Row-major 0/1 image.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, unsigned char fill = 0);

    int width() const { return width_; }
    int height() const { return height_; }

    unsigned char& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    unsigned char at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::size_t count() const;
    const std::vector<unsigned char>& data() const { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<unsigned char> data_;
};

enum class ImageErrorKind {
    Unreadable,
    UnsupportedFormat,
    UnsupportedBitDepth,
    TruncatedData,
    WrongChannelCount,
    InvalidArgument,
};

class ImageError : public std::runtime_error {
public:
    ImageError(ImageErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ImageErrorKind kind() const { return kind_; }

private:
    ImageErrorKind kind_;
};

/// Decodes binary PPM (P6), PGM (P5) with maxval 255, or 8-bit PNG.
Raster load_image(const std::filesystem::path& path);

/// Writes a 3-channel raster as P6, rounding and clamping to [0, 255].
void write_ppm(const std::filesystem::path& path, const Raster& img);

/// ITU-R BT.601 luma.
Raster to_grayscale(const Raster& img);

/// Sigma used when none is supplied: 0.3 * ((k - 1) / 2 - 1) + 0.8.
double default_gaussian_sigma(int kernel_size);

/// Normalized 1-D Gaussian weights of odd length `kernel_size`.
/// A non-positive `sigma` selects default_gaussian_sigma.
std::vector<double> gaussian_kernel(int kernel_size, double sigma = 0.0);

/// Separable Gaussian convolution with edge replication at the borders.
Raster gaussian_blur(const Raster& img, int kernel_size, double sigma = 0.0);

/// Bilinear interpolation between pixel centers. Coordinates are clamped to
/// the image before interpolation. Returns one value per channel (first
/// `img.channels()` entries are valid).
std::array<double, 3> sample_bilinear(const Raster& img, double x, double y);

struct CannyThresholds {
    double low = 50.0;
    double high = 150.0;
};

/// Canny edge detector: 3x3 Sobel, L2 magnitude, 4-direction non-maximum
/// suppression and 8-connected hysteresis.
BinaryMask canny(const Raster& gray, double low = 50.0, double high = 150.0);

/// Sobel gradient magnitude (same scale canny thresholds refer to).
std::vector<double> sobel_magnitude(const Raster& gray);

/// Number of 8-connected components of set pixels.
int count_components(const BinaryMask& mask);

}  // namespace erfd
