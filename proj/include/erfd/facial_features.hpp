#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "erfd/geometry.hpp"
#include "erfd/imaging.hpp"

namespace erfd {

inline constexpr int kDiffCount = kWindowSize - 1;  // 19 consecutive t differences
inline constexpr int kCenterDiff = 9;               // straddles t = -1 -> 0
inline constexpr int kColorCount = 3;
inline constexpr std::size_t kWindowFeatureSize =
    static_cast<std::size_t>(kWindowSize) * kDiffCount * kColorCount;

/// 20 (u) x 19 (t difference) x 3 (RGB) block, C order.
struct WindowFeature {
    std::vector<double> values = std::vector<double>(kWindowFeatureSize, 0.0);

    static std::size_t index(int u, int j, int c) {
        return (static_cast<std::size_t>(u) * kDiffCount + j) * kColorCount + c;
    }
    double& at(int u, int j, int c) { return values[index(u, j, c)]; }
    double at(int u, int j, int c) const { return values[index(u, j, c)]; }
};

/// Per-frame facial boundary feature: 16 windows of 20 x 19 x 3 values.
struct FacialFeature {
    std::vector<WindowFeature> windows = std::vector<WindowFeature>(kFacialWindowCount);
    int frame_index = 0;
    int unoriented_windows = 0;

    double at(int w, int u, int j, int c) const { return windows[w].at(u, j, c); }
};

/// Rounds to a multiple of 2^-30. Feature values stay far below 2^22, so
/// differences and sums of two quantized values are exact in double, which
/// makes D + B == F hold bit for bit.
inline double quantize_feature(double v) {
    constexpr double kGrid = 1073741824.0;  // 2^30
    return std::nearbyint(v * kGrid) / kGrid;
}

/// Absolute per-channel differences between consecutive t samples along each
/// u row of the window, sampled bilinearly from the raw frame and quantized.
WindowFeature window_color_diff(const Raster& img, const EdgeWindow& window);

FacialFeature facial_feature(const Raster& img, const LandmarkSet& landmarks,
                             const WindowConfig& cfg, int frame_index = 0);

}  // namespace erfd
