#include <gtest/gtest.h>

#include <cmath>

#include "erfd/facial_features.hpp"
#include "erfd/synth.hpp"
#include "support.hpp"

using namespace erfd;
using erfd::testing::constant_rgb;
using erfd::testing::ellipse_landmarks;

namespace {

// Pair stacked vertically: t runs along -x with spacing sqrt(s).
EdgeWindow vertical_pair_window(double x, double s) {
    return build_window({x, 40.0}, {x, 60.0}, ScaleFactor{s, 1.0, 1.0}, 54.0);
}

double center_mean(const FacialFeature& f) {
    double sum = 0.0;
    int n = 0;
    for (int w = 0; w < kFacialWindowCount; ++w) {
        for (int u = 0; u < kWindowSize; ++u) {
            for (int c = 0; c < kColorCount; ++c) {
                sum += f.at(w, u, kCenterDiff, c);
                ++n;
            }
        }
    }
    return sum / n;
}

}  // namespace

TEST(WindowColorDiff, ConstantImageGivesZeros) {
    const Raster img = constant_rgb(100, 100, 12, 200, 77);
    const auto f = window_color_diff(img, vertical_pair_window(50.0, 0.5));
    for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(WindowColorDiff, LinearFieldGivesStepLength) {
    Raster img(100, 100, 3);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = x;
        }
    }
    for (double s : {0.04, 0.25, 1.0}) {
        const auto f = window_color_diff(img, vertical_pair_window(50.0, s));
        for (double v : f.values) EXPECT_NEAR(v, std::sqrt(s), 1e-6);
    }
}

TEST(WindowColorDiff, TwoToneBoundarySpikesAtCenter) {
    Raster img(100, 100, 3);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = x >= 50 ? 200.0 : 0.0;
        }
    }
    // t = -1 samples x = 50 and t = 0 samples x = 49.
    const auto f = window_color_diff(img, vertical_pair_window(49.0, 1.0));
    for (int u = 0; u < kWindowSize; ++u) {
        for (int j = 0; j < kDiffCount; ++j) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(f.at(u, j, c), j == kCenterDiff ? 200.0 : 0.0, 1e-9);
            }
        }
    }
}

TEST(WindowColorDiff, NeedsRgb) {
    EXPECT_THROW(window_color_diff(Raster(10, 10, 1), vertical_pair_window(5.0, 1.0)), ImageError);
}

TEST(FacialFeature, ShapeAndBounds) {
    Rng rng(8);
    Raster img(128, 128, 3);
    for (auto& v : img.data()) v = rng.uniform(0.0, 255.0);
    const auto f = facial_feature(img, ellipse_landmarks({64, 64}, 28, 34), WindowConfig{}, 7);
    EXPECT_EQ(f.frame_index, 7);
    ASSERT_EQ(f.windows.size(), 16u);
    for (const auto& w : f.windows) {
        ASSERT_EQ(w.values.size(), static_cast<std::size_t>(20 * 19 * 3));
        for (double v : w.values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 255.0);
        }
    }
}

TEST(FacialFeature, OffsetInvariantAndScaleEquivariant) {
    Rng rng(9);
    Raster img(128, 128, 3);
    for (auto& v : img.data()) v = rng.uniform(0.0, 200.0);
    const auto lm = ellipse_landmarks({60, 66}, 26, 31);
    const auto base = facial_feature(img, lm, WindowConfig{});

    Raster shifted = img;
    for (auto& v : shifted.data()) v += 37.0;
    const auto fs = facial_feature(shifted, lm, WindowConfig{});
    for (int w = 0; w < 16; ++w) {
        for (std::size_t i = 0; i < kWindowFeatureSize; ++i) {
            EXPECT_NEAR(fs.windows[w].values[i], base.windows[w].values[i], 1e-9);
        }
    }
    for (double c : {0.0, 0.3, 1.0}) {
        Raster scaled = img;
        for (auto& v : scaled.data()) v *= c;
        const auto fc = facial_feature(scaled, lm, WindowConfig{});
        for (int w = 0; w < 16; ++w) {
            for (std::size_t i = 0; i < kWindowFeatureSize; ++i) {
                EXPECT_NEAR(fc.windows[w].values[i], c * base.windows[w].values[i], 1e-9);
            }
        }
    }
}

TEST(FacialFeature, FakeCenterExceedsReal) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SceneSpec real = random_scene(seed);
        SceneSpec fake = real;
        fake.forgery.enabled = true;
        const auto rv = render_video(real);
        const auto fv = render_video(fake);
        double real_center = 0.0;
        double fake_center = 0.0;
        for (int i = 0; i < 4; ++i) {
            real_center += center_mean(facial_feature(rv.frames[i], rv.landmarks[i], WindowConfig{}));
            fake_center += center_mean(facial_feature(fv.frames[i], fv.landmarks[i], WindowConfig{}));
        }
        EXPECT_GT(fake_center, real_center) << "seed " << seed;
        // Calibrated on the generator: a real seam stays within a few levels.
        EXPECT_LT(real_center / 4, 12.0) << "seed " << seed;
    }
}
