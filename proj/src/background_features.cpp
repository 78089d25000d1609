#include "erfd/background_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "erfd/random.hpp"

namespace erfd {

BinaryMask face_exclusion_mask(const LandmarkSet& landmarks, int width, int height,
                               int blur_kernel) {
    const ConvexHull hull = convex_hull(landmarks.boundary_points());
    Raster outside(width, height, 1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            outside.at(x, y) = hull_contains(hull, {static_cast<double>(x), static_cast<double>(y)})
                                   ? 0.0
                                   : 1.0;
        }
    }
    const Raster blurred = gaussian_blur(outside, blur_kernel);
    BinaryMask mask(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            mask.at(x, y) = blurred.at(x, y) >= 1.0 - 1e-6 ? 1 : 0;
        }
    }
    return mask;
}

BinaryMask background_edge_image(const Raster& img, const LandmarkSet& landmarks,
                                 const BackgroundConfig& cfg) {
    const Raster gray = to_grayscale(gaussian_blur(img, cfg.image_blur_kernel));
    BinaryMask edges = canny(gray, cfg.canny.low, cfg.canny.high);
    const BinaryMask keep =
        face_exclusion_mask(landmarks, img.width(), img.height(), cfg.mask_blur_kernel);
    for (int y = 0; y < edges.height(); ++y) {
        for (int x = 0; x < edges.width(); ++x) {
            edges.at(x, y) = edges.at(x, y) & keep.at(x, y);
        }
    }
    return edges;
}

BinaryMask background_edge_image(const Raster& img, const LandmarkSet& landmarks,
                                 double canny_low, double canny_high) {
    BackgroundConfig cfg;
    cfg.canny = {canny_low, canny_high};
    return background_edge_image(img, landmarks, cfg);
}

std::vector<PixelPoint> sample_edge_points(const BinaryMask& edges, double fraction,
                                           std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw GeometryError(GeometryErrorKind::InvalidParameter,
                            "sample fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < edges.data().size(); ++i) {
        if (edges.data()[i]) indices.push_back(i);
    }
    if (indices.empty()) return {};

    const auto wanted = static_cast<std::size_t>(
        std::max(1.0, std::round(fraction * static_cast<double>(indices.size()))));
    const std::size_t n = std::min(wanted, indices.size());

    // Partial Fisher-Yates: the first n slots end up a uniform sample.
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_index(indices.size() - i);
        std::swap(indices[i], indices[j]);
    }
    indices.resize(n);
    std::sort(indices.begin(), indices.end());

    std::vector<PixelPoint> points;
    points.reserve(n);
    const auto w = static_cast<std::size_t>(edges.width());
    for (auto i : indices) points.push_back({static_cast<int>(i % w), static_cast<int>(i / w)});
    return points;
}

namespace {

bool has_three_edges(const BinaryMask& edges) {
    int seen = 0;
    for (auto v : edges.data()) {
        if (v && ++seen >= 3) return true;
    }
    return false;
}

bool row_major_less(const PixelPoint& a, const PixelPoint& b) {
    return a.y < b.y || (a.y == b.y && a.x < b.x);
}

}  // namespace

std::optional<std::pair<PixelPoint, PixelPoint>> nearest_two_neighbors(const PixelPoint& p,
                                                                       const BinaryMask& edges) {
    if (!has_three_edges(edges)) return std::nullopt;

    struct Candidate {
        long d2;
        PixelPoint q;
    };
    auto better = [](const Candidate& a, const Candidate& b) {
        return a.d2 < b.d2 || (a.d2 == b.d2 && row_major_less(a.q, b.q));
    };
    std::vector<Candidate> best;
    auto consider = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= edges.width() || y >= edges.height()) return;
        if (!edges.at(x, y) || (x == p.x && y == p.y)) return;
        const long dx = x - p.x;
        const long dy = y - p.y;
        Candidate c{dx * dx + dy * dy, {x, y}};
        best.push_back(c);
        std::sort(best.begin(), best.end(), better);
        if (best.size() > 2) best.pop_back();
    };

    const int max_r = std::max(edges.width(), edges.height()) +
                      std::max({std::abs(p.x), std::abs(p.y)});
    for (int r = 1; r <= max_r; ++r) {
        for (int x = p.x - r; x <= p.x + r; ++x) {
            consider(x, p.y - r);
            consider(x, p.y + r);
        }
        for (int y = p.y - r + 1; y <= p.y + r - 1; ++y) {
            consider(p.x - r, y);
            consider(p.x + r, y);
        }
        // Anything on a later ring is at least r + 1 away.
        if (best.size() == 2 && best[1].d2 < static_cast<long>(r + 1) * (r + 1)) break;
    }
    if (best.size() < 2) return std::nullopt;
    PixelPoint a = best[0].q;
    PixelPoint b = best[1].q;
    if (row_major_less(b, a)) std::swap(a, b);
    return std::make_pair(a, b);
}

void symmetrize(WindowFeature& feature) {
    for (int u = 0; u < kWindowSize; ++u) {
        for (int k = 1; k <= kCenterDiff; ++k) {
            for (int c = 0; c < kColorCount; ++c) {
                const double mean =
                    0.5 * (feature.at(u, kCenterDiff - k, c) + feature.at(u, kCenterDiff + k, c));
                feature.at(u, kCenterDiff - k, c) = mean;
                feature.at(u, kCenterDiff + k, c) = mean;
            }
        }
    }
}

BackgroundFeature background_feature(const Raster& img, const BinaryMask& edges,
                                     const ScaleFactor& scale, const BackgroundConfig& cfg,
                                     std::uint64_t seed, int frame_index) {
    BackgroundFeature out;
    out.frame_index = frame_index;
    const auto points = sample_edge_points(edges, cfg.sample_fraction, seed);
    out.empty_edge_map = points.empty();

    std::vector<double> sum(kWindowFeatureSize, 0.0);
    for (const auto& p : points) {
        const auto pair = nearest_two_neighbors(p, edges);
        if (!pair) {
            ++out.skipped_points;
            continue;
        }
        const Point a{static_cast<double>(pair->first.x), static_cast<double>(pair->first.y)};
        const Point b{static_cast<double>(pair->second.x), static_cast<double>(pair->second.y)};
        WindowFeature f = window_color_diff(img, build_window(a, b, scale, cfg.window.beta));
        symmetrize(f);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.values[i];
        ++out.n_sampled;
    }
    if (out.n_sampled > 0) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            out.values.values[i] = quantize_feature(sum[i] / out.n_sampled);
        }
    }
    return out;
}

BackgroundFeature background_feature(const Raster& img, const LandmarkSet& landmarks,
                                     const BackgroundConfig& cfg, std::uint64_t seed,
                                     int frame_index) {
    const ConvexHull hull = convex_hull(landmarks.boundary_points());
    const ScaleFactor scale =
        scale_factor(hull, cfg.window.alpha, cfg.window.scale_mode, cfg.window.reference_area);
    return background_feature(img, background_edge_image(img, landmarks, cfg), scale, cfg, seed,
                              frame_index);
}

}  // namespace erfd
