#include "erfd/facial_features.hpp"

#include <cmath>

namespace erfd {

WindowFeature window_color_diff(const Raster& img, const EdgeWindow& window) {
    if (img.channels() != kColorCount) {
        throw ImageError(ImageErrorKind::WrongChannelCount, "color differences need an RGB frame");
    }
    WindowFeature out;
    std::array<std::array<double, 3>, kWindowSize> row{};
    for (int u = 0; u < kWindowSize; ++u) {
        for (int j = 0; j < kWindowSize; ++j) {
            const Point& p = window.coords[u][j];
            row[j] = sample_bilinear(img, p.x, p.y);
        }
        for (int j = 0; j < kDiffCount; ++j) {
            for (int c = 0; c < kColorCount; ++c) {
                out.at(u, j, c) = quantize_feature(std::abs(row[j + 1][c] - row[j][c]));
            }
        }
    }
    return out;
}

FacialFeature facial_feature(const Raster& img, const LandmarkSet& landmarks,
                             const WindowConfig& cfg, int frame_index) {
    const FacialWindows fw = facial_windows(landmarks, cfg);
    FacialFeature feature;
    feature.frame_index = frame_index;
    for (int w = 0; w < kFacialWindowCount; ++w) {
        feature.windows[w] = window_color_diff(img, fw.windows[w]);
        if (!fw.windows[w].oriented) ++feature.unoriented_windows;
    }
    return feature;
}

}  // namespace erfd
