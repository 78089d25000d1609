#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "erfd/geometry.hpp"
#include "erfd/imaging.hpp"
#include "erfd/nn/tensor.hpp"
#include "erfd/random.hpp"

namespace erfd::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("erfd_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// 68 landmarks whose first 17 follow the lower half of an axis-aligned
/// ellipse (left jaw end through the chin to the right end) and whose
/// remaining 51 sit inside it.
inline LandmarkSet ellipse_landmarks(Point center, double ax, double ay, bool clockwise = false) {
    std::vector<Point> pts;
    for (int i = 0; i < kBoundaryPointCount; ++i) {
        const double theta = M_PI - i * M_PI / (kBoundaryPointCount - 1);
        pts.push_back({center.x + ax * std::cos(theta), center.y + ay * std::sin(theta)});
    }
    if (clockwise) std::reverse(pts.begin(), pts.end());
    for (int i = 0; i < kLandmarkCount - kBoundaryPointCount; ++i) {
        const double r = 0.2 + 0.5 * (i % 5) / 5.0;
        const double phi = 2.0 * M_PI * i / 51.0;
        pts.push_back({center.x + r * ax * std::cos(phi), center.y + r * ay * std::sin(phi)});
    }
    return LandmarkSet(pts);
}

/// Convex-ish random face: boundary points at increasing angles on a
/// jittered ellipse, so the set is never collinear or coincident.
inline LandmarkSet random_landmarks(Rng& rng) {
    const Point c{rng.uniform(40.0, 200.0), rng.uniform(40.0, 200.0)};
    const double ax = rng.uniform(10.0, 80.0);
    const double ay = rng.uniform(10.0, 80.0);
    const double rot = rng.uniform(-M_PI, M_PI);
    std::vector<Point> pts;
    for (int i = 0; i < kBoundaryPointCount; ++i) {
        const double theta = M_PI - i * M_PI / (kBoundaryPointCount - 1) +
                             rng.uniform(-0.02, 0.02);
        const double r = rng.uniform(0.9, 1.1);
        const double x = r * ax * std::cos(theta);
        const double y = r * ay * std::sin(theta);
        pts.push_back({c.x + x * std::cos(rot) - y * std::sin(rot),
                       c.y + x * std::sin(rot) + y * std::cos(rot)});
    }
    for (int i = kBoundaryPointCount; i < kLandmarkCount; ++i) {
        pts.push_back({c.x + rng.uniform(-0.3, 0.3) * ax, c.y + rng.uniform(-0.3, 0.3) * ay});
    }
    return LandmarkSet(pts);
}

inline Raster constant_rgb(int w, int h, double r, double g, double b) {
    Raster img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    }
    return img;
}

inline nn::Tensor5 random_tensor(nn::Tensor5::Dims dims, Rng& rng, double scale = 1.0) {
    nn::Tensor5 t(dims);
    for (auto& v : t.data()) v = scale * rng.normal();
    return t;
}

/// Relative error between an analytic and a numeric gradient. The floor
/// keeps entries that are zero up to rounding from dominating.
inline double relative_error(const std::vector<double>& analytic,
                             const std::vector<double>& numeric) {
    double scale = 0.0;
    for (double a : analytic) scale = std::max(scale, std::abs(a));
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom =
            std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-3 * scale, 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

/// Central differences of a scalar function with respect to every entry of
/// `values` (restored afterwards).
inline std::vector<double> numeric_gradient(std::vector<double>& values,
                                            const std::function<double()>& f,
                                            double h = 1e-5) {
    std::vector<double> grad(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = f();
        values[i] = saved - h;
        const double down = f();
        values[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace erfd::testing
