#include "erfd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "erfd/parallel.hpp"
#include "erfd/random.hpp"

namespace erfd {

namespace {

constexpr double kMargin = 20.0;
constexpr int kSupersample = 4;

struct FaceFrame {
    double cos_r, sin_r;
    const FaceEllipse& e;

    explicit FaceFrame(const FaceEllipse& ellipse)
        : cos_r(std::cos(ellipse.rotation)), sin_r(std::sin(ellipse.rotation)), e(ellipse) {}

    Point to_face(double x, double y) const {
        const double dx = x - e.center.x;
        const double dy = y - e.center.y;
        return {cos_r * dx + sin_r * dy, -sin_r * dx + cos_r * dy};
    }
    Point to_image(double fx, double fy) const {
        return {e.center.x + cos_r * fx - sin_r * fy, e.center.y + sin_r * fx + cos_r * fy};
    }
    bool inside(double x, double y) const {
        const Point f = to_face(x, y);
        const double a = f.x / e.axis_x;
        const double b = f.y / e.axis_y;
        return f.y >= 0.0 && a * a + b * b <= 1.0;
    }
    /// Signed distance to the outline, first-order accurate near it.
    double signed_distance(double x, double y) const {
        const Point f = to_face(x, y);
        const double a2 = e.axis_x * e.axis_x;
        const double b2 = e.axis_y * e.axis_y;
        const double rho = std::sqrt(f.x * f.x / a2 + f.y * f.y / b2);
        if (rho < 1e-9) return -std::min(e.axis_x, e.axis_y);
        const double grad = std::hypot(f.x / a2, f.y / b2) / rho;
        return (rho - 1.0) / grad;
    }
};

std::array<double, 2> half_extents(const FaceEllipse& e) {
    const double c = std::cos(e.rotation);
    const double s = std::sin(e.rotation);
    return {std::sqrt(e.axis_x * e.axis_x * c * c + e.axis_y * e.axis_y * s * s),
            std::sqrt(e.axis_x * e.axis_x * s * s + e.axis_y * e.axis_y * c * c)};
}

// Fraction of the pixel centered at (x, y) for which `inside` holds.
template <typename Inside>
double coverage(int x, int y, Inside&& inside) {
    int hits = 0;
    for (int j = 0; j < kSupersample; ++j)
        for (int i = 0; i < kSupersample; ++i) {
            const double sx = x + (i + 0.5) / kSupersample - 0.5;
            const double sy = y + (j + 0.5) / kSupersample - 0.5;
            if (inside(sx, sy)) ++hits;
        }
    return static_cast<double>(hits) / (kSupersample * kSupersample);
}

// Noise-free scene plus the static texture.
Raster base_image(const SceneSpec& spec) {
    const FaceFrame face(spec.face);
    Raster img(spec.width, spec.height, 3);
    Rng texture(derive_seed(spec.seed, fnv1a64("texture")));
    for (int y = 0; y < spec.height; ++y) {
        const double v = spec.height > 1 ? static_cast<double>(y) / (spec.height - 1) : 0.0;
        for (int x = 0; x < spec.width; ++x) {
            Rgb px;
            for (int c = 0; c < 3; ++c) {
                px[c] = (1.0 - v) * spec.background_top[c] + v * spec.background_bottom[c];
            }
            for (const auto& r : spec.rects) {
                const double cov = coverage(x, y, [&](double sx, double sy) {
                    return sx >= r.x0 && sx < r.x1 && sy >= r.y0 && sy < r.y1;
                });
                for (int c = 0; c < 3; ++c) px[c] += cov * (r.color[c] - px[c]);
            }
            const double cov = coverage(x, y, [&](double sx, double sy) { return face.inside(sx, sy); });
            for (int c = 0; c < 3; ++c) {
                px[c] += cov * (spec.skin[c] - px[c]);
                img.at(x, y, c) = px[c] + spec.texture_noise * texture.normal();
            }
        }
    }
    return img;
}

void add_jitter(Raster& img, const SceneSpec& spec, int frame) {
    Rng rng(derive_seed(spec.seed, fnv1a64("jitter"), static_cast<std::uint64_t>(frame)));
    for (auto& v : img.data()) v += spec.jitter * rng.normal();
}

// Alpha of the pasted region: the skin half of the face ellipse.
std::vector<double> forgery_alpha(const SceneSpec& spec) {
    const FaceFrame face(spec.face);
    std::vector<double> alpha(static_cast<std::size_t>(spec.width) * spec.height);
    const double r = spec.forgery.feather;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const double sd = std::max(face.signed_distance(x, y), -face.to_face(x, y).y);
            double a;
            if (r > 0.0) {
                a = 0.5 * std::erfc(sd / (r * std::sqrt(2.0)));
            } else {
                a = sd <= 0.0 ? 1.0 : 0.0;
            }
            alpha[static_cast<std::size_t>(y) * spec.width + x] = a;
        }
    return alpha;
}

void quantize(Raster& img) {
    for (auto& v : img.data()) v = std::clamp(std::round(v), 0.0, 255.0);
}

}  // namespace

void SceneSpec::validate() const {
    if (width < 1 || height < 1) throw SynthError("scene: image size must be positive");
    if (frames < kClipFrames) {
        throw SynthError("scene: at least " + std::to_string(kClipFrames) + " frames required");
    }
    if (!(face.axis_x > 0.0) || !(face.axis_y > 0.0)) {
        throw SynthError("scene: face axes must be positive");
    }
    const auto ext = half_extents(face);
    if (face.center.x - ext[0] < kMargin || face.center.x + ext[0] > width - 1 - kMargin ||
        face.center.y - ext[1] < kMargin || face.center.y + ext[1] > height - 1 - kMargin) {
        throw SynthError("scene: face ellipse must keep a 20 px margin inside the image");
    }
    if (texture_noise < 0.0 || jitter < 0.0 || camera_blur < 0.0 || forgery.feather < 0.0) {
        throw SynthError("scene: noise, blur and feather amounts must be non-negative");
    }
    for (const auto& r : rects) {
        if (!(r.x0 < r.x1) || !(r.y0 < r.y1)) throw SynthError("scene: empty background rectangle");
    }
}

LandmarkSet scene_landmarks(const FaceEllipse& face) {
    const FaceFrame frame(face);
    const double pi = std::acos(-1.0);
    std::vector<Point> pts;
    pts.reserve(kLandmarkCount);
    // Boundary points sit just outside the outline so that every segment
    // midpoint, where a facial window is centered, lies exactly on it.
    const double step = pi / (kBoundaryPointCount - 1);
    const double lift = 1.0 / std::cos(step / 2.0);
    for (int i = 0; i < kBoundaryPointCount; ++i) {
        const double theta = pi - i * step;
        pts.push_back(frame.to_image(lift * face.axis_x * std::cos(theta), lift * face.axis_y * std::sin(theta)));
    }
    // Interior points in units of the semi-axes, squeezed into the skin half.
    auto add = [&](double u, double v) {
        pts.push_back(frame.to_image(u * face.axis_x, (0.45 + 0.5 * v) * face.axis_y));
    };
    auto line = [&](int n, double u0, double v0, double u1, double v1) {
        for (int i = 0; i < n; ++i) {
            const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
            add(u0 + s * (u1 - u0), v0 + s * (v1 - v0));
        }
    };
    auto ring = [&](int n, double cu, double cv, double ru, double rv) {
        for (int i = 0; i < n; ++i) {
            const double t = 2.0 * pi * i / n;
            add(cu - ru * std::cos(t), cv - rv * std::sin(t));
        }
    };
    line(5, -0.6, -0.45, -0.2, -0.5);   // brows
    line(5, 0.2, -0.5, 0.6, -0.45);
    line(4, 0.0, -0.3, 0.0, 0.0);       // nose bridge
    line(5, -0.2, 0.1, 0.2, 0.1);       // nose base
    ring(6, -0.4, -0.3, 0.12, 0.05);    // eyes
    ring(6, 0.4, -0.3, 0.12, 0.05);
    ring(12, 0.0, 0.45, 0.35, 0.12);    // mouth
    ring(8, 0.0, 0.45, 0.2, 0.05);
    return LandmarkSet(std::move(pts));
}

RenderedVideo render_video(const SceneSpec& spec) {
    spec.validate();
    const Raster base = base_image(spec);
    const LandmarkSet landmarks = scene_landmarks(spec.face);
    const int blur_kernel = 2 * static_cast<int>(std::ceil(3.0 * spec.camera_blur)) + 1;

    std::vector<double> alpha;
    Raster pasted;
    if (spec.forgery.enabled) {
        alpha = forgery_alpha(spec);
        // The pasted face keeps the texture of the first frame throughout.
        pasted = base;
        add_jitter(pasted, spec, 0);
        for (std::size_t i = 0; i < pasted.data().size(); ++i) {
            pasted.data()[i] += spec.forgery.shift[i % 3];
        }
    }

    RenderedVideo out;
    out.label = spec.label();
    for (int f = 0; f < spec.frames; ++f) {
        Raster frame = base;
        add_jitter(frame, spec, f);
        if (spec.forgery.enabled) {
            auto& d = frame.data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                const double a = alpha[i / 3];
                d[i] = (1.0 - a) * d[i] + a * pasted.data()[i];
            }
        }
        if (spec.camera_blur > 0.0) frame = gaussian_blur(frame, blur_kernel, spec.camera_blur);
        quantize(frame);
        out.frames.push_back(std::move(frame));
        out.landmarks.push_back(landmarks);
    }
    return out;
}

SceneSpec random_scene(std::uint64_t seed, int frames, int width, int height) {
    Rng rng(derive_seed(seed, fnv1a64("scene-layout")));
    SceneSpec s;
    s.width = width;
    s.height = height;
    s.frames = frames;
    s.seed = seed;

    const double scale = std::min(width, height) / 128.0;
    s.face.axis_x = rng.uniform(24.0, 30.0) * scale;
    s.face.axis_y = rng.uniform(30.0, 36.0) * scale;
    s.face.rotation = rng.uniform(-0.12, 0.12);
    s.face.center = {(width - 1) / 2.0 + rng.uniform(-4.0, 4.0) * scale,
                     (height - 1) / 2.0 + rng.uniform(-4.0, 4.0) * scale};

    const double red = rng.uniform(180.0, 212.0);
    const double green = red - rng.uniform(20.0, 40.0);
    s.skin = {red, green, green - rng.uniform(5.0, 20.0)};

    // Keeps every outline well above the default Canny high threshold.
    const double gray = rng.uniform(25.0, 65.0);
    const double slope = rng.uniform(-12.0, 12.0);
    for (int c = 0; c < 3; ++c) {
        const double tint = rng.uniform(-8.0, 8.0);
        s.background_top[c] = gray + tint - slope / 2.0;
        s.background_bottom[c] = gray + tint + slope / 2.0;
    }

    // Two skin-toned bands, one on each side of the face, give the background
    // edges of the same contrast as the face outline. They run past the image
    // border so their corners never blunt the edges inside the frame.
    const auto ext = half_extents(s.face);
    const double keep_out = 10.0 * scale;
    const double border = 8.0 * scale;
    const bool vertical = rng.uniform() < 0.5;
    const double lo_face = (vertical ? s.face.center.x - ext[0] : s.face.center.y - ext[1]) - keep_out;
    const double hi_face = (vertical ? s.face.center.x + ext[0] : s.face.center.y + ext[1]) + keep_out;
    const double extent = vertical ? width : height;
    const double span = vertical ? height : width;
    const double lo_edge = rng.uniform(border, std::max(border, lo_face));
    const double hi_edge = rng.uniform(std::min(extent - border, hi_face), extent - border);
    for (const auto& [from, to] : {std::pair{-extent, lo_edge}, std::pair{hi_edge, 2.0 * extent}}) {
        BackgroundRect r;
        if (vertical) {
            r = {from, -span, to, 2.0 * span, {}};
        } else {
            r = {-span, from, 2.0 * span, to, {}};
        }
        for (int c = 0; c < 3; ++c) r.color[c] = s.skin[c] + rng.uniform(-12.0, 12.0);
        s.rects.push_back(r);
    }
    return s;
}

std::vector<CorpusItem> corpus_specs(const CorpusOptions& opts) {
    if (opts.videos < 2) throw SynthError("corpus: at least 2 videos required");
    if (!(opts.fake_ratio > 0.0 && opts.fake_ratio < 1.0)) {
        throw SynthError("corpus: fake ratio must lie strictly between 0 and 1");
    }
    const int n_fake = static_cast<int>(std::lround(opts.videos * opts.fake_ratio));
    const int n_real = opts.videos - n_fake;
    if (n_fake < 1 || n_real < 1) throw SynthError("corpus: both classes need at least one video");

    auto id = [](const char* prefix, int k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%04d", prefix, k);
        return std::string(buf);
    };
    std::vector<CorpusItem> items;
    std::vector<SceneSpec> reals;
    for (int k = 0; k < n_real; ++k) {
        SceneSpec s = random_scene(derive_seed(opts.seed, fnv1a64("scene"), static_cast<std::uint64_t>(k)),
                                   opts.frames, opts.width, opts.height);
        reals.push_back(s);
        items.push_back({id("real", k), s});
    }
    for (int k = 0; k < n_fake; ++k) {
        SceneSpec s = reals[static_cast<std::size_t>(k % n_real)];
        s.forgery = opts.forgery;
        s.forgery.enabled = true;
        items.push_back({id("fake", k), s});
    }
    return items;
}

Manifest make_corpus(const CorpusOptions& opts, const std::filesystem::path& out_dir, int threads) {
    namespace fs = std::filesystem;
    const auto items = corpus_specs(opts);
    std::error_code ec;
    fs::create_directories(out_dir / "videos", ec);
    if (ec) throw SynthError("cannot create " + (out_dir / "videos").string() + ": " + ec.message());

    Manifest manifest;
    manifest.videos.resize(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        const auto& item = items[i];
        const RenderedVideo video = render_video(item.spec);
        const fs::path dir = out_dir / "videos" / item.id;
        std::error_code dir_ec;
        fs::create_directories(dir, dir_ec);
        if (dir_ec) throw SynthError("cannot create " + dir.string() + ": " + dir_ec.message());
        VideoEntry entry;
        entry.id = item.id;
        entry.label = video.label;
        std::map<int, LandmarkSet> landmarks;
        for (int f = 0; f < static_cast<int>(video.frames.size()); ++f) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%03d.ppm", f);
            write_ppm(dir / name, video.frames[f]);
            entry.frames.push_back(dir / name);
            landmarks.emplace(f, video.landmarks[f]);
        }
        entry.landmarks = dir / "landmarks.json";
        save_landmark_file(entry.landmarks, landmarks);
        manifest.videos[i] = std::move(entry);
    });
    save_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace erfd
