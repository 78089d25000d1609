#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace erfd {

struct Point {
    double x = 0.0;
    double y = 0.0;

    Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
    Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
    Point operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Point&) const = default;
};

double dot(const Point& a, const Point& b);
double cross(const Point& a, const Point& b);
double distance(const Point& a, const Point& b);

enum class GeometryErrorKind {
    InvalidLandmarks,
    DegenerateHull,
    CoincidentLandmarks,
    InvalidParameter,
    MalformedLandmarkFile,
};

class GeometryError : public std::runtime_error {
public:
    GeometryError(GeometryErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    GeometryErrorKind kind() const { return kind_; }

private:
    GeometryErrorKind kind_;
};

inline constexpr int kLandmarkCount = 68;
inline constexpr int kBoundaryPointCount = 17;
inline constexpr int kFacialWindowCount = kBoundaryPointCount - 1;
inline constexpr int kWindowSize = 20;
inline constexpr int kWindowOffset = 10;  // t and u both run over -10..9

/// 68-point face annotation. The first 17 points trace the jawline.
class LandmarkSet {
public:
    explicit LandmarkSet(std::vector<Point> points);

    const std::vector<Point>& points() const { return points_; }
    std::vector<Point> boundary_points() const;

private:
    std::vector<Point> points_;
};

struct ConvexHull {
    std::vector<Point> vertices;  // counter-clockwise in a y-up frame
    double area = 0.0;
};

/// Andrew's monotone chain followed by the shoelace formula.
ConvexHull convex_hull(const std::vector<Point>& points);

/// Inclusive point-in-convex-polygon test.
bool hull_contains(const ConvexHull& hull, const Point& p);

enum class ScaleMode { AsWritten, AreaProportional };

ScaleMode parse_scale_mode(const std::string& name);
std::string to_string(ScaleMode mode);

struct ScaleFactor {
    double s = 0.0;          // squared t-step length
    double hull_area = 0.0;
    double alpha = 0.0;
};

/// s = alpha / hull area of the boundary points.
ScaleFactor scale_factor(const std::vector<Point>& boundary_points, double alpha);
ScaleFactor scale_factor(const ConvexHull& hull, double alpha);

/// Variant selected by `mode`; AreaProportional uses
/// s = alpha * area / reference_area^2 so the t-step grows with the face.
ScaleFactor scale_factor(const ConvexHull& hull, double alpha, ScaleMode mode,
                         double reference_area);

/// Real-valued sampling grid, indexed [u + 10][t + 10].
struct EdgeWindow {
    std::array<std::array<Point, kWindowSize>, kWindowSize> coords{};
    int window_index = 0;  // 1..16 for facial windows, 0 for background
    bool oriented = true;  // false when inward orientation was undecidable

    const Point& at(int u, int t) const { return coords[u + kWindowOffset][t + kWindowOffset]; }
    Point& at(int u, int t) { return coords[u + kWindowOffset][t + kWindowOffset]; }

    Point center() const { return at(0, 0); }
    Point t_step() const { return at(0, 1) - at(0, 0); }
    Point u_step() const { return at(1, 0) - at(0, 0); }
};

/// Segment perpendicular to (a, b) through their midpoint, t = -10..9.
std::array<Point, kWindowSize> perpendicular_segment(const Point& a, const Point& b,
                                                     const ScaleFactor& scale);

/// Extends the perpendicular segment with lines parallel to (a, b).
EdgeWindow horizontal_lines(const std::array<Point, kWindowSize>& segment, const Point& a,
                            const Point& b, const ScaleFactor& scale, double beta);

/// Builds the full window for the landmark pair (a, b).
EdgeWindow build_window(const Point& a, const Point& b, const ScaleFactor& scale, double beta);

/// Flips the t axis so that negative t points into the hull, then fixes the
/// u axis handedness. Windows whose t endpoints fall on the same side of the
/// hull boundary keep their t axis and come back with oriented = false.
EdgeWindow orient_inward(const EdgeWindow& window, const ConvexHull& hull);

struct WindowConfig {
    double alpha = 25.0;
    double beta = 54.0;
    ScaleMode scale_mode = ScaleMode::AsWritten;
    double reference_area = 10000.0;
};

struct FacialWindows {
    std::vector<EdgeWindow> windows;  // 16, in boundary-point order
    ConvexHull hull;
    ScaleFactor scale;
};

FacialWindows facial_windows(const LandmarkSet& landmarks, const WindowConfig& cfg);

/// Landmark sidecar: { "frames": [ { "index": int, "points": [[x, y] x 68] } ] }
std::map<int, LandmarkSet> load_landmark_file(const std::filesystem::path& path);
void save_landmark_file(const std::filesystem::path& path,
                        const std::map<int, LandmarkSet>& frames);

}  // namespace erfd
