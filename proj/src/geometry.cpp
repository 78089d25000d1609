#include "erfd/geometry.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace erfd {

double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y; }
double cross(const Point& a, const Point& b) { return a.x * b.y - a.y * b.x; }
double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

LandmarkSet::LandmarkSet(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() != kLandmarkCount) {
        throw GeometryError(GeometryErrorKind::InvalidLandmarks,
                            "expected 68 landmarks, got " + std::to_string(points_.size()));
    }
    for (const auto& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw GeometryError(GeometryErrorKind::InvalidLandmarks, "non-finite landmark");
        }
    }
    for (int i = 0; i < kBoundaryPointCount; ++i) {
        for (int j = i + 1; j < kBoundaryPointCount; ++j) {
            if (points_[i] == points_[j]) {
                throw GeometryError(GeometryErrorKind::InvalidLandmarks,
                                    "facial boundary points must be distinct");
            }
        }
    }
}

std::vector<Point> LandmarkSet::boundary_points() const {
    return {points_.begin(), points_.begin() + kBoundaryPointCount};
}

ConvexHull convex_hull(const std::vector<Point>& points) {
    std::vector<Point> pts = points;
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) {
        throw GeometryError(GeometryErrorKind::DegenerateHull, "hull needs 3 distinct points");
    }

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    auto turn = [](const Point& o, const Point& a, const Point& b) { return cross(a - o, b - o); };
    for (const auto& p : pts) {
        while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);

    double twice_area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        twice_area += cross(hull[i], hull[(i + 1) % hull.size()]);
    }
    const double area = 0.5 * std::abs(twice_area);
    if (hull.size() < 3 || !(area > 0.0)) {
        throw GeometryError(GeometryErrorKind::DegenerateHull, "boundary points are collinear");
    }
    return {std::move(hull), area};
}

bool hull_contains(const ConvexHull& hull, const Point& p) {
    const auto& v = hull.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (cross(v[(i + 1) % v.size()] - v[i], p - v[i]) < 0.0) return false;
    }
    return true;
}

ScaleMode parse_scale_mode(const std::string& name) {
    if (name == "as-written") return ScaleMode::AsWritten;
    if (name == "area-proportional") return ScaleMode::AreaProportional;
    throw GeometryError(GeometryErrorKind::InvalidParameter, "unknown scale mode: " + name);
}

std::string to_string(ScaleMode mode) {
    return mode == ScaleMode::AsWritten ? "as-written" : "area-proportional";
}

ScaleFactor scale_factor(const ConvexHull& hull, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw GeometryError(GeometryErrorKind::InvalidParameter, "alpha must be positive");
    }
    return {alpha / hull.area, hull.area, alpha};
}

ScaleFactor scale_factor(const std::vector<Point>& boundary_points, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw GeometryError(GeometryErrorKind::InvalidParameter, "alpha must be positive");
    }
    return scale_factor(convex_hull(boundary_points), alpha);
}

ScaleFactor scale_factor(const ConvexHull& hull, double alpha, ScaleMode mode,
                         double reference_area) {
    if (mode == ScaleMode::AsWritten) return scale_factor(hull, alpha);
    if (!(reference_area > 0.0)) {
        throw GeometryError(GeometryErrorKind::InvalidParameter, "reference area must be positive");
    }
    ScaleFactor sf = scale_factor(hull, alpha);
    sf.s = alpha * hull.area / (reference_area * reference_area);
    return sf;
}

std::array<Point, kWindowSize> perpendicular_segment(const Point& a, const Point& b,
                                                     const ScaleFactor& scale) {
    const double d = distance(a, b);
    if (!(d > 0.0)) {
        throw GeometryError(GeometryErrorKind::CoincidentLandmarks,
                            "landmark pair must not coincide");
    }
    if (!(scale.s > 0.0)) {
        throw GeometryError(GeometryErrorKind::InvalidParameter, "scale factor must be positive");
    }
    const double root_s = std::sqrt(scale.s);
    const Point mid{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
    const double kx = (a.y - b.y) * root_s / d;
    const double ky = -(a.x - b.x) * root_s / d;
    std::array<Point, kWindowSize> seg{};
    for (int t = -kWindowOffset; t < kWindowSize - kWindowOffset; ++t) {
        seg[t + kWindowOffset] = {kx * t + mid.x, ky * t + mid.y};
    }
    return seg;
}

EdgeWindow horizontal_lines(const std::array<Point, kWindowSize>& segment, const Point& a,
                            const Point& b, const ScaleFactor& scale, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw GeometryError(GeometryErrorKind::InvalidParameter, "beta must be positive");
    }
    const double root_2s = std::sqrt(2.0 * scale.s);
    const double kx = (b.x - a.x) * root_2s / beta;
    const double ky = (b.y - a.y) * root_2s / beta;
    EdgeWindow w;
    for (int u = -kWindowOffset; u < kWindowSize - kWindowOffset; ++u) {
        for (int t = -kWindowOffset; t < kWindowSize - kWindowOffset; ++t) {
            const Point& p = segment[t + kWindowOffset];
            w.at(u, t) = {kx * u + p.x, ky * u + p.y};
        }
    }
    return w;
}

EdgeWindow build_window(const Point& a, const Point& b, const ScaleFactor& scale, double beta) {
    return horizontal_lines(perpendicular_segment(a, b, scale), a, b, scale, beta);
}

EdgeWindow orient_inward(const EdgeWindow& window, const ConvexHull& hull) {
    const bool first_inside = hull_contains(hull, window.at(0, -kWindowOffset));
    const bool last_inside = hull_contains(hull, window.at(0, kWindowSize - kWindowOffset - 1));
    EdgeWindow out = window;
    if (first_inside == last_inside) {
        out.oriented = false;
        return out;
    }
    out.oriented = true;
    if (first_inside) return out;

    // Point reflection through the center negates both axis directions,
    // which is the window of the swapped landmark pair.
    const Point c = window.center();
    for (int u = -kWindowOffset; u < kWindowSize - kWindowOffset; ++u) {
        for (int t = -kWindowOffset; t < kWindowSize - kWindowOffset; ++t) {
            const Point& src = window.at(u, t);
            out.at(u, t) = {2.0 * c.x - src.x, 2.0 * c.y - src.y};
        }
    }
    return out;
}

FacialWindows facial_windows(const LandmarkSet& landmarks, const WindowConfig& cfg) {
    const auto fbps = landmarks.boundary_points();
    FacialWindows result;
    result.hull = convex_hull(fbps);
    result.scale = scale_factor(result.hull, cfg.alpha, cfg.scale_mode, cfg.reference_area);
    result.windows.reserve(kFacialWindowCount);
    for (int i = 0; i < kFacialWindowCount; ++i) {
        EdgeWindow w = orient_inward(build_window(fbps[i], fbps[i + 1], result.scale, cfg.beta),
                                     result.hull);
        w.window_index = i + 1;
        result.windows.push_back(w);
    }
    return result;
}

std::map<int, LandmarkSet> load_landmark_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw GeometryError(GeometryErrorKind::MalformedLandmarkFile,
                            "cannot open landmark file: " + path.string());
    }
    std::map<int, LandmarkSet> frames;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& frame : doc.at("frames")) {
            std::vector<Point> points;
            for (const auto& p : frame.at("points")) {
                if (p.size() != 2) {
                    throw GeometryError(GeometryErrorKind::MalformedLandmarkFile,
                                        "landmark point must be [x, y]");
                }
                points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            }
            const int index = frame.at("index").get<int>();
            if (!frames.emplace(index, LandmarkSet(std::move(points))).second) {
                throw GeometryError(GeometryErrorKind::MalformedLandmarkFile,
                                    "duplicate landmark frame index " + std::to_string(index));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw GeometryError(GeometryErrorKind::MalformedLandmarkFile,
                            path.string() + ": " + e.what());
    }
    return frames;
}

void save_landmark_file(const std::filesystem::path& path,
                        const std::map<int, LandmarkSet>& frames) {
    nlohmann::json doc;
    doc["frames"] = nlohmann::json::array();
    for (const auto& [index, set] : frames) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : set.points()) pts.push_back({p.x, p.y});
        doc["frames"].push_back({{"index", index}, {"points", std::move(pts)}});
    }
    std::ofstream out(path);
    if (!out) {
        throw GeometryError(GeometryErrorKind::MalformedLandmarkFile,
                            "cannot write landmark file: " + path.string());
    }
    out << doc.dump() << '\n';
}

}  // namespace erfd
