#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "erfd/clip.hpp"
#include "erfd/geometry.hpp"
#include "erfd/imaging.hpp"

namespace erfd {

using Rgb = std::array<double, 3>;

/// Face outline. `rotation` is in radians; in face coordinates +y points
/// toward the chin. Skin covers the half of the ellipse below the line
/// through the jaw ends, which is the region the boundary landmarks enclose;
/// above it the scene shows background.
struct FaceEllipse {
    Point center{64.0, 64.0};
    double axis_x = 28.0;
    double axis_y = 34.0;
    double rotation = 0.0;
};

struct BackgroundRect {
    double x0, y0, x1, y1;  // pixel-edge coordinates, x0 < x1, y0 < y1
    Rgb color;
};

/// Pasted-face emulation: the lower half of the face is color shifted and
/// blended in with a Gaussian-feathered alpha of the given radius.
struct Forgery {
    bool enabled = false;
    Rgb shift{40.0, 40.0, 40.0};
    double feather = 3.0;
};

class SynthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SceneSpec {
    int width = 128;
    int height = 128;
    FaceEllipse face;
    Rgb skin{200.0, 160.0, 140.0};
    double texture_noise = 2.0;   // static per-pixel texture amplitude
    double jitter = 2.0;          // per-frame texture perturbation amplitude
    Rgb background_top{80.0, 80.0, 80.0};
    Rgb background_bottom{70.0, 70.0, 70.0};
    std::vector<BackgroundRect> rects;
    // Sigma of the final blur. Edge ramps this wide make the background
    // profile insensitive to Canny's whole-pixel edge positions, so real
    // faces and background edges share one profile.
    double camera_blur = 2.0;
    Forgery forgery;
    int frames = kClipFrames;
    std::uint64_t seed = 0;

    int label() const { return forgery.enabled ? 1 : 0; }
    /// Throws SynthError when the face leaves the 20 px margin or frames < 24.
    void validate() const;
};

struct RenderedVideo {
    std::vector<Raster> frames;          // RGB, integer-valued in [0, 255]
    std::vector<LandmarkSet> landmarks;  // one per frame
    int label = 0;
};

/// Boundary points 0..16 run along the lower half of the ellipse at equal
/// parametric angles from the left jaw end through the chin, lifted just
/// outside it so segment midpoints lie on the outline; 17..67 sit at fixed
/// interior offsets.
LandmarkSet scene_landmarks(const FaceEllipse& face);

RenderedVideo render_video(const SceneSpec& spec);

/// Random real scene: skin tone, background, face placement and rectangles
/// all drawn from `seed`.
SceneSpec random_scene(std::uint64_t seed, int frames = kClipFrames, int width = 128,
                       int height = 128);

struct CorpusOptions {
    int videos = 10;
    double fake_ratio = 0.5;
    std::uint64_t seed = 0;
    int frames = kClipFrames;
    int width = 128;
    int height = 128;
    Forgery forgery{true, {40.0, 40.0, 40.0}, 3.0};
};

struct CorpusItem {
    std::string id;
    SceneSpec spec;
};

/// round(videos * fake_ratio) fakes. Fake k is made from the scene of real
/// k mod n_real, the way a face swap starts from a source video.
std::vector<CorpusItem> corpus_specs(const CorpusOptions& opts);

/// Writes videos/<id>/frame_NNN.ppm, videos/<id>/landmarks.json and
/// manifest.json under `out_dir`.
Manifest make_corpus(const CorpusOptions& opts, const std::filesystem::path& out_dir,
                     int threads = 1);

}  // namespace erfd
