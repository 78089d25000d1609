#include <gtest/gtest.h>

#include <cmath>

#include "erfd/geometry.hpp"
#include "support.hpp"

using namespace erfd;
using erfd::testing::ellipse_landmarks;
using erfd::testing::random_landmarks;
using erfd::testing::TempDir;

namespace {

ScaleFactor unit_scale() { return {1.0, 25.0, 25.0}; }

GeometryErrorKind geometry_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const GeometryError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a GeometryError";
    return GeometryErrorKind::InvalidParameter;
}

}  // namespace

TEST(ConvexHull, TriangleWithInteriorPoints) {
    const auto hull = convex_hull({{0, 0}, {4, 0}, {0, 3}, {1, 1}, {0.5, 0.5}, {2, 0}});
    EXPECT_DOUBLE_EQ(hull.area, 6.0);
    EXPECT_EQ(hull.vertices.size(), 3u);
}

TEST(ConvexHull, UnitSquare) {
    EXPECT_DOUBLE_EQ(convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}}).area, 1.0);
}

TEST(ConvexHull, RegularPolygonArea) {
    std::vector<Point> pts;
    const double r = 100.0;
    for (int i = 0; i < 17; ++i) {
        const double a = 2.0 * M_PI * i / 17.0;
        pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
    const double expected = 17.0 / 2.0 * r * r * std::sin(2.0 * M_PI / 17.0);
    EXPECT_NEAR(convex_hull(pts).area, expected, 0.02 * expected);
}

TEST(ConvexHull, CollinearIsDegenerate) {
    EXPECT_EQ(geometry_error([] { convex_hull({{0, 0}, {1, 1}, {2, 2}, {3, 3}}); }),
              GeometryErrorKind::DegenerateHull);
}

TEST(ConvexHull, ContainsIsInclusive) {
    const auto hull = convex_hull({{0, 0}, {4, 0}, {4, 4}, {0, 4}});
    EXPECT_TRUE(hull_contains(hull, {2, 2}));
    EXPECT_TRUE(hull_contains(hull, {4, 2}));
    EXPECT_FALSE(hull_contains(hull, {4.01, 2}));
}

TEST(ScaleFactor, Examples) {
    const std::vector<Point> square5{{0, 0}, {5, 0}, {5, 5}, {0, 5}};
    EXPECT_EQ(scale_factor(square5, 25.0).s, 1.0);
    const std::vector<Point> square200{{0, 0}, {200, 0}, {200, 200}, {0, 200}};
    const auto sf = scale_factor(square200, 25.0);
    EXPECT_EQ(sf.s, 25.0 / 40000.0);
    EXPECT_DOUBLE_EQ(sf.s, 6.25e-4);
    EXPECT_EQ(geometry_error([&] { scale_factor(square5, 0.0); }),
              GeometryErrorKind::InvalidParameter);
}

TEST(ScaleFactor, AreaProportionalGrowsWithFace) {
    const auto small = convex_hull({{0, 0}, {50, 0}, {50, 50}, {0, 50}});
    const auto large = convex_hull({{0, 0}, {100, 0}, {100, 100}, {0, 100}});
    const double s_small = scale_factor(small, 25.0, ScaleMode::AreaProportional, 10000.0).s;
    const double s_large = scale_factor(large, 25.0, ScaleMode::AreaProportional, 10000.0).s;
    EXPECT_NEAR(s_large / s_small, 4.0, 1e-12);
    EXPECT_EQ(parse_scale_mode("as-written"), ScaleMode::AsWritten);
    EXPECT_EQ(parse_scale_mode(to_string(ScaleMode::AreaProportional)),
              ScaleMode::AreaProportional);
}

TEST(PerpendicularSegment, HandExample) {
    const auto seg = perpendicular_segment({0, 0}, {3, 4}, unit_scale());
    for (int t = -10; t < 10; ++t) {
        EXPECT_NEAR(seg[t + 10].x, -0.8 * t + 1.5, 1e-12);
        EXPECT_NEAR(seg[t + 10].y, 0.6 * t + 2.0, 1e-12);
    }
    EXPECT_NEAR(seg[11].x, 0.7, 1e-12);
    EXPECT_NEAR(seg[11].y, 2.6, 1e-12);
}

TEST(PerpendicularSegment, CoincidentLandmarks) {
    EXPECT_EQ(geometry_error([] { perpendicular_segment({1, 1}, {1, 1}, unit_scale()); }),
              GeometryErrorKind::CoincidentLandmarks);
}

TEST(HorizontalLines, HandExample) {
    const auto w = build_window({0, 0}, {3, 4}, unit_scale(), 54.0);
    const Point step = w.u_step();
    EXPECT_NEAR(step.x, 3.0 * std::sqrt(2.0) / 54.0, 1e-12);
    EXPECT_NEAR(step.y, 4.0 * std::sqrt(2.0) / 54.0, 1e-12);
    EXPECT_NEAR(step.x, 0.07857, 1e-5);
    EXPECT_NEAR(step.y, 0.10476, 1e-5);
    const auto seg = perpendicular_segment({0, 0}, {3, 4}, unit_scale());
    for (int t = -10; t < 10; ++t) EXPECT_EQ(w.at(0, t), seg[t + 10]);
    EXPECT_EQ(geometry_error([] {
                  horizontal_lines(perpendicular_segment({0, 0}, {3, 4}, unit_scale()), {0, 0},
                                   {3, 4}, unit_scale(), 0.0);
              }),
              GeometryErrorKind::InvalidParameter);
}

TEST(EdgeWindow, GridInvariantsOnRandomPairs) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Point a{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        const Point b{a.x + rng.uniform(1, 20), a.y + rng.uniform(-20, 20)};
        const ScaleFactor sf{rng.uniform(0.01, 3.0), 1.0, 1.0};
        const auto w = build_window(a, b, sf, 54.0);
        const Point dir = b - a;
        EXPECT_NEAR(dot(w.t_step(), dir), 0.0, 1e-9);
        EXPECT_NEAR(cross(w.u_step(), dir), 0.0, 1e-9);
        EXPECT_NEAR(w.center().x, (a.x + b.x) / 2, 1e-9);
        EXPECT_NEAR(w.center().y, (a.y + b.y) / 2, 1e-9);
        EXPECT_NEAR(distance(w.at(0, 1), w.at(0, 0)), std::sqrt(sf.s), 1e-9);
        EXPECT_NEAR(distance(w.at(1, 0), w.at(0, 0)),
                    distance(a, b) * std::sqrt(2 * sf.s) / 54.0, 1e-9);
        for (int u = -10; u < 9; ++u) {
            for (int t = -10; t < 9; ++t) {
                const Point dt = w.at(u, t + 1) - w.at(u, t);
                const Point du = w.at(u + 1, t) - w.at(u, t);
                EXPECT_NEAR(dt.x, w.t_step().x, 1e-9);
                EXPECT_NEAR(dt.y, w.t_step().y, 1e-9);
                EXPECT_NEAR(du.x, w.u_step().x, 1e-9);
                EXPECT_NEAR(du.y, w.u_step().y, 1e-9);
            }
        }
    }
}

TEST(OrientInward, IdempotentAndUndoesMirroring) {
    const auto lm = ellipse_landmarks({64, 64}, 28, 34);
    const auto fbps = lm.boundary_points();
    const auto hull = convex_hull(fbps);
    const ScaleFactor sf = scale_factor(hull, 25.0);
    for (int i = 0; i < 16; ++i) {
        const auto inward = orient_inward(build_window(fbps[i], fbps[i + 1], sf, 54.0), hull);
        ASSERT_TRUE(inward.oriented);
        EXPECT_TRUE(hull_contains(hull, inward.at(0, -10)));
        const auto again = orient_inward(inward, hull);
        EXPECT_EQ(again.coords, inward.coords);
        const auto mirrored = orient_inward(build_window(fbps[i + 1], fbps[i], sf, 54.0), hull);
        for (int u = -10; u < 10; ++u) {
            for (int t = -10; t < 10; ++t) {
                EXPECT_NEAR(mirrored.at(u, t).x, inward.at(u, t).x, 1e-9);
                EXPECT_NEAR(mirrored.at(u, t).y, inward.at(u, t).y, 1e-9);
            }
        }
    }
}

TEST(OrientInward, UndecidableWindowIsFlagged) {
    const auto hull = convex_hull({{0, 0}, {100, 0}, {100, 100}, {0, 100}});
    const auto w = build_window({40, 50}, {60, 50}, unit_scale(), 54.0);
    const auto out = orient_inward(w, hull);
    EXPECT_FALSE(out.oriented);
    EXPECT_EQ(out.coords, w.coords);
}

TEST(FacialWindows, SixteenCenteredWindows) {
    const auto lm = ellipse_landmarks({64, 64}, 28, 34);
    const auto fw = facial_windows(lm, WindowConfig{});
    ASSERT_EQ(fw.windows.size(), 16u);
    const auto fbps = lm.boundary_points();
    for (int i = 0; i < 16; ++i) {
        const auto& w = fw.windows[i];
        EXPECT_EQ(w.window_index, i + 1);
        EXPECT_NEAR(w.center().x, (fbps[i].x + fbps[i + 1].x) / 2, 1e-9);
        EXPECT_NEAR(w.center().y, (fbps[i].y + fbps[i + 1].y) / 2, 1e-9);
        EXPECT_TRUE(hull_contains(fw.hull, w.at(0, -10)));
    }
    EXPECT_EQ(fw.scale.s, 25.0 / fw.hull.area);
}

TEST(FacialWindows, WindingDoesNotMatter) {
    const auto ccw = facial_windows(ellipse_landmarks({64, 64}, 30, 30), WindowConfig{});
    const auto cw = facial_windows(ellipse_landmarks({64, 64}, 30, 30, true), WindowConfig{});
    // Reversed landmark order visits the same pairs from the other end.
    for (int i = 0; i < 16; ++i) {
        const auto& a = ccw.windows[i];
        const auto& b = cw.windows[15 - i];
        for (int u = -10; u < 10; ++u) {
            for (int t = -10; t < 10; ++t) {
                EXPECT_NEAR(a.at(u, t).x, b.at(u, t).x, 1e-9);
                EXPECT_NEAR(a.at(u, t).y, b.at(u, t).y, 1e-9);
            }
        }
    }
}

TEST(FacialWindows, TranslationEquivariant) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto lm = random_landmarks(rng);
        const Point shift{rng.uniform(-30, 30), rng.uniform(-30, 30)};
        std::vector<Point> moved;
        for (const auto& p : lm.points()) moved.push_back(p + shift);
        const auto a = facial_windows(lm, WindowConfig{});
        const auto b = facial_windows(LandmarkSet(moved), WindowConfig{});
        for (int i = 0; i < 16; ++i) {
            for (int u = -10; u < 10; ++u) {
                for (int t = -10; t < 10; ++t) {
                    EXPECT_NEAR(b.windows[i].at(u, t).x, a.windows[i].at(u, t).x + shift.x, 1e-9);
                    EXPECT_NEAR(b.windows[i].at(u, t).y, a.windows[i].at(u, t).y + shift.y, 1e-9);
                }
            }
        }
    }
}

TEST(LandmarkSet, Validation) {
    EXPECT_EQ(geometry_error([] { LandmarkSet(std::vector<Point>(10)); }),
              GeometryErrorKind::InvalidLandmarks);
    std::vector<Point> pts = ellipse_landmarks({64, 64}, 28, 34).points();
    pts[3] = pts[4];
    EXPECT_EQ(geometry_error([&] { LandmarkSet{pts}; }), GeometryErrorKind::InvalidLandmarks);
    pts = ellipse_landmarks({64, 64}, 28, 34).points();
    pts[20].x = std::nan("");
    EXPECT_EQ(geometry_error([&] { LandmarkSet{pts}; }), GeometryErrorKind::InvalidLandmarks);
}

TEST(LandmarkFile, RoundTripAndMalformed) {
    TempDir dir("lm");
    std::map<int, LandmarkSet> frames;
    frames.emplace(0, ellipse_landmarks({64, 64}, 28, 34));
    frames.emplace(1, ellipse_landmarks({65.5, 63.25}, 28, 34));
    save_landmark_file(dir / "lm.json", frames);
    const auto loaded = load_landmark_file(dir / "lm.json");
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded.at(1).points(), frames.at(1).points());

    std::ofstream(dir / "short.json") << R"({"frames": [{"index": 0, "points": [[1, 2]]}]})";
    EXPECT_EQ(geometry_error([&] { load_landmark_file(dir / "short.json"); }),
              GeometryErrorKind::InvalidLandmarks);
    std::ofstream(dir / "bad.json") << R"({"frames": [{"index": 0, "points": [[1, 2, 3]]}]})";
    EXPECT_EQ(geometry_error([&] { load_landmark_file(dir / "bad.json"); }),
              GeometryErrorKind::MalformedLandmarkFile);
    std::ofstream(dir / "nokey.json") << R"({"frame": []})";
    EXPECT_EQ(geometry_error([&] { load_landmark_file(dir / "nokey.json"); }),
              GeometryErrorKind::MalformedLandmarkFile);
    std::ofstream(dir / "junk.json") << "{not json";
    EXPECT_EQ(geometry_error([&] { load_landmark_file(dir / "junk.json"); }),
              GeometryErrorKind::MalformedLandmarkFile);
}
