#include "erfd/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <utility>

namespace erfd {

Raster::Raster(int width, int height, int channels, double fill)
    : Raster(width, height, channels,
             std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                     std::max(height, 0) * std::max(channels, 0),
                                 fill)) {}

Raster::Raster(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw ImageError(ImageErrorKind::InvalidArgument, "raster dimensions must be positive");
    }
    if (channels != 1 && channels != 3) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "raster must have 1 or 3 channels");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw ImageError(ImageErrorKind::InvalidArgument, "raster data length mismatch");
    }
}

BinaryMask::BinaryMask(int width, int height, unsigned char fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    if (width < 1 || height < 1) {
        throw ImageError(ImageErrorKind::InvalidArgument, "mask dimensions must be positive");
    }
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 1));
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageError(ImageErrorKind::Unreadable, "cannot open image: " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header tokenizer; comments run from '#' to end of line.
class PnmHeader {
public:
    explicit PnmHeader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) {
            throw ImageError(ImageErrorKind::TruncatedData, "truncated pnm header");
        }
        if (!std::isdigit(bytes_[pos_])) {
            throw ImageError(ImageErrorKind::UnsupportedFormat, "malformed pnm header");
        }
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1L << 30)) {
                throw ImageError(ImageErrorKind::UnsupportedFormat, "pnm dimension too large");
            }
            ++pos_;
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t payload_offset() {
        if (pos_ >= bytes_.size()) {
            throw ImageError(ImageErrorKind::TruncatedData, "truncated pnm header");
        }
        return pos_ + 1;
    }

    void seek(std::size_t p) { pos_ = p; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

Raster decode_pnm(const std::vector<unsigned char>& bytes, int channels) {
    PnmHeader header(bytes);
    header.seek(2);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width < 1 || height < 1) {
        throw ImageError(ImageErrorKind::UnsupportedFormat, "pnm dimensions must be positive");
    }
    if (maxval != 255) {
        throw ImageError(ImageErrorKind::UnsupportedBitDepth,
                         "only maxval 255 is supported, got " + std::to_string(maxval));
    }
    const std::size_t offset = header.payload_offset();
    const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < offset || bytes.size() - offset < needed) {
        throw ImageError(ImageErrorKind::TruncatedData, "truncated pnm raster");
    }
    std::vector<double> data(needed);
    for (std::size_t i = 0; i < needed; ++i) data[i] = bytes[offset + i];
    return Raster(width, height, channels, std::move(data));
}

struct PngSource {
    const std::vector<unsigned char>* bytes;
    std::size_t pos;
    bool truncated;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->pos + length > src->bytes->size()) {
        src->truncated = true;
        png_error(png, "unexpected end of png data");
    }
    std::memcpy(out, src->bytes->data() + src->pos, length);
    src->pos += length;
}

struct PngDecodeResult {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<unsigned char> pixels;
    std::string error;
};

// Kept free of non-trivial destructors between setjmp and longjmp.
void decode_png_raw(PngSource& src, PngDecodeResult& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        out.error = "libpng initialization failed";
        return;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        out.error = "png decode failed";
        return;
    }
    png_set_read_fn(png, &src, png_read_from_memory);
    png_read_info(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (out.bit_depth != 8 && color_type != PNG_COLOR_TYPE_PALETTE) {
        png_destroy_read_struct(&png, &info, nullptr);
        return;
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.pixels.resize(rowbytes * out.height);
    for (int y = 0; y < out.height; ++y) {
        png_read_row(png, out.pixels.data() + rowbytes * y, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
}

Raster decode_png(const std::vector<unsigned char>& bytes) {
    PngSource src{&bytes, 0, false};
    PngDecodeResult result;
    decode_png_raw(src, result);
    if (src.truncated) {
        throw ImageError(ImageErrorKind::TruncatedData, "truncated png data");
    }
    if (!result.error.empty()) {
        throw ImageError(ImageErrorKind::UnsupportedFormat, result.error);
    }
    if (result.bit_depth != 8) {
        throw ImageError(ImageErrorKind::UnsupportedBitDepth,
                         "only 8-bit png is supported, got " + std::to_string(result.bit_depth));
    }
    if (result.channels != 1 && result.channels != 3) {
        throw ImageError(ImageErrorKind::UnsupportedFormat, "unsupported png channel layout");
    }
    std::vector<double> data(result.pixels.begin(), result.pixels.end());
    return Raster(result.width, result.height, result.channels, std::move(data));
}

}  // namespace

Raster load_image(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < 2) {
        throw ImageError(ImageErrorKind::TruncatedData, "truncated data: " + path.string());
    }
    if (bytes[0] == 'P' && bytes[1] == '6') return decode_pnm(bytes, 3);
    if (bytes[0] == 'P' && bytes[1] == '5') return decode_pnm(bytes, 1);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    throw ImageError(ImageErrorKind::UnsupportedFormat, "unsupported image format: " + path.string());
}

void write_ppm(const std::filesystem::path& path, const Raster& img) {
    if (img.channels() != 3) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "P6 output requires 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ImageError(ImageErrorKind::Unreadable, "cannot write image: " + path.string());
    }
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<char> bytes(img.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(std::round(img.data()[i]), 0.0, 255.0);
        bytes[i] = static_cast<char>(static_cast<unsigned char>(v));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ImageError(ImageErrorKind::Unreadable, "failed writing image: " + path.string());
    }
}

Raster to_grayscale(const Raster& img) {
    if (img.channels() != 3) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "grayscale conversion needs 3 channels");
    }
    Raster gray(img.width(), img.height(), 1);
    const auto& src = img.data();
    auto& dst = gray.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    }
    return gray;
}

double default_gaussian_sigma(int kernel_size) {
    return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
    if (kernel_size < 3 || kernel_size % 2 == 0) {
        throw ImageError(ImageErrorKind::InvalidArgument,
                         "gaussian kernel size must be odd and >= 3");
    }
    if (sigma <= 0.0) sigma = default_gaussian_sigma(kernel_size);
    const int radius = kernel_size / 2;
    std::vector<double> weights(kernel_size);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
        weights[i + radius] = w;
        sum += w;
    }
    for (auto& w : weights) w /= sum;
    return weights;
}

Raster gaussian_blur(const Raster& img, int kernel_size, double sigma) {
    const auto kernel = gaussian_kernel(kernel_size, sigma);
    const int radius = kernel_size / 2;
    const int w = img.width();
    const int h = img.height();
    const int ch = img.channels();

    Raster tmp(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    const int xx = std::clamp(x + k, 0, w - 1);
                    acc += kernel[k + radius] * img.at(xx, y, c);
                }
                tmp.at(x, y, c) = acc;
            }
        }
    }
    Raster out(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    const int yy = std::clamp(y + k, 0, h - 1);
                    acc += kernel[k + radius] * tmp.at(x, yy, c);
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

std::array<double, 3> sample_bilinear(const Raster& img, double x, double y) {
    const double max_x = img.width() - 1;
    const double max_y = img.height() - 1;
    x = std::clamp(x, 0.0, max_x);
    y = std::clamp(y, 0.0, max_y);
    const int x0 = std::min(static_cast<int>(std::floor(x)), img.width() - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;

    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (int c = 0; c < img.channels(); ++c) {
        const double top = img.at(x0, y0, c) + fx * (img.at(x1, y0, c) - img.at(x0, y0, c));
        const double bottom = img.at(x0, y1, c) + fx * (img.at(x1, y1, c) - img.at(x0, y1, c));
        out[c] = top + fy * (bottom - top);
    }
    return out;
}

namespace {

struct Gradients {
    std::vector<double> gx;
    std::vector<double> gy;
    std::vector<double> magnitude;
};

Gradients sobel(const Raster& gray) {
    const int w = gray.width();
    const int h = gray.height();
    Gradients g;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    g.gx.assign(n, 0.0);
    g.gy.assign(n, 0.0);
    g.magnitude.assign(n, 0.0);
    auto px = [&](int x, int y) {
        return gray.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            g.gx[i] = gx;
            g.gy[i] = gy;
            g.magnitude[i] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return g;
}

}  // namespace

std::vector<double> sobel_magnitude(const Raster& gray) {
    if (gray.channels() != 1) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "sobel needs a single channel");
    }
    return sobel(gray).magnitude;
}

BinaryMask canny(const Raster& gray, double low, double high) {
    if (gray.channels() != 1) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "canny needs a single channel");
    }
    if (!(low > 0.0) || !(low < high)) {
        throw ImageError(ImageErrorKind::InvalidArgument, "canny requires 0 < low < high");
    }
    const int w = gray.width();
    const int h = gray.height();
    const Gradients g = sobel(gray);
    auto mag = [&](int x, int y) -> double {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
        return g.magnitude[static_cast<std::size_t>(y) * w + x];
    };

    // tan(22.5 deg) and tan(67.5 deg) split the four direction sectors.
    constexpr double kTan22 = 0.41421356237309503;
    constexpr double kTan67 = 2.4142135623730949;

    enum : unsigned char { kNone = 0, kWeak = 1, kStrong = 2 };
    std::vector<unsigned char> state(static_cast<std::size_t>(w) * h, kNone);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = g.magnitude[i];
            if (m <= low) continue;
            const double ax = std::abs(g.gx[i]);
            const double ay = std::abs(g.gy[i]);
            bool is_max = false;
            if (ay <= kTan22 * ax) {
                is_max = m > mag(x - 1, y) && m >= mag(x + 1, y);
            } else if (ay >= kTan67 * ax) {
                is_max = m > mag(x, y - 1) && m >= mag(x, y + 1);
            } else if ((g.gx[i] > 0) == (g.gy[i] > 0)) {
                is_max = m > mag(x - 1, y - 1) && m >= mag(x + 1, y + 1);
            } else {
                is_max = m > mag(x + 1, y - 1) && m >= mag(x - 1, y + 1);
            }
            if (is_max) state[i] = m > high ? kStrong : kWeak;
        }
    }

    BinaryMask out(w, h);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (state[static_cast<std::size_t>(y) * w + x] != kStrong || out.at(x, y)) continue;
            out.at(x, y) = 1;
            stack.emplace_back(x, y);
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h || out.at(nx, ny)) continue;
                        if (state[static_cast<std::size_t>(ny) * w + nx] == kNone) continue;
                        out.at(nx, ny) = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
        }
    }
    return out;
}

int count_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<unsigned char> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<std::pair<int, int>> stack;
    int components = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y) || seen[static_cast<std::size_t>(y) * w + x]) continue;
            ++components;
            seen[static_cast<std::size_t>(y) * w + x] = 1;
            stack.emplace_back(x, y);
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                        if (!mask.at(nx, ny) || seen[j]) continue;
                        seen[j] = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
        }
    }
    return components;
}

}  // namespace erfd
