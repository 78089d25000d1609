#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "erfd/facial_features.hpp"
#include "erfd/geometry.hpp"
#include "erfd/imaging.hpp"

namespace erfd {

struct PixelPoint {
    int x = 0;
    int y = 0;
    bool operator==(const PixelPoint&) const = default;
};

struct BackgroundConfig {
    WindowConfig window;
    CannyThresholds canny;
    double sample_fraction = 0.1;
    int image_blur_kernel = 5;
    int mask_blur_kernel = 15;
};

/// Symmetrized, averaged background window.
struct BackgroundFeature {
    WindowFeature values;
    int n_sampled = 0;
    int frame_index = 0;
    int skipped_points = 0;
    bool empty_edge_map = false;
};

/// 1 away from the face, 0 on the boundary-point hull grown by the blur
/// radius: the hull mask is blurred and anything below 1 is dropped.
BinaryMask face_exclusion_mask(const LandmarkSet& landmarks, int width, int height,
                               int blur_kernel = 15);

/// Canny edges of the blurred frame with the face region removed.
BinaryMask background_edge_image(const Raster& img, const LandmarkSet& landmarks,
                                 const BackgroundConfig& cfg);
BinaryMask background_edge_image(const Raster& img, const LandmarkSet& landmarks,
                                 double canny_low, double canny_high);

/// Uniform sample without replacement of max(1, round(fraction * |edges|))
/// edge pixels, returned in row-major order.
std::vector<PixelPoint> sample_edge_points(const BinaryMask& edges, double fraction,
                                           std::uint64_t seed);

/// The two edge pixels nearest to `p` (excluding `p`), ties broken
/// row-major, returned in row-major order. Empty when the map holds fewer
/// than three edge pixels.
std::optional<std::pair<PixelPoint, PixelPoint>> nearest_two_neighbors(const PixelPoint& p,
                                                                       const BinaryMask& edges);

/// Averages each (9 - k, 9 + k) pair of t differences; the center is kept.
void symmetrize(WindowFeature& feature);

BackgroundFeature background_feature(const Raster& img, const LandmarkSet& landmarks,
                                     const BackgroundConfig& cfg, std::uint64_t seed,
                                     int frame_index = 0);

/// Same, with the scale factor supplied by the caller.
BackgroundFeature background_feature(const Raster& img, const BinaryMask& edges,
                                     const ScaleFactor& scale, const BackgroundConfig& cfg,
                                     std::uint64_t seed, int frame_index = 0);

}  // namespace erfd
