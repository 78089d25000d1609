#include "erfd/clip.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "erfd/random.hpp"
#include "json.hpp"

namespace erfd {

ChannelMode parse_channel_mode(const std::string& name) {
    if (name == "full-96") return ChannelMode::Full96;
    if (name == "facial-48") return ChannelMode::Facial48;
    throw ClipError(ClipErrorKind::InvalidManifest, "unknown channel mode: " + name);
}

std::string to_string(ChannelMode mode) {
    return mode == ChannelMode::Full96 ? "full-96" : "facial-48";
}

int channel_count(ChannelMode mode) {
    return mode == ChannelMode::Full96 ? 2 * kFacialChannels : kFacialChannels;
}

ClipTensor::ClipTensor(int channels_, int frames_, int label_, std::string video_id_)
    : channels(channels_),
      frames(frames_),
      data(static_cast<std::size_t>(channels_) * frames_ * kWindowSize * kDiffCount, 0.0),
      label(label_),
      video_id(std::move(video_id_)) {}

ChannelMode ClipTensor::mode() const {
    return channels == kFacialChannels ? ChannelMode::Facial48 : ChannelMode::Full96;
}

std::vector<WindowFeature> difference_feature(const FacialFeature& facial,
                                              const BackgroundFeature& background) {
    if (facial.windows.size() != static_cast<std::size_t>(kFacialWindowCount) ||
        background.values.values.size() != kWindowFeatureSize) {
        throw ClipError(ClipErrorKind::ShapeMismatch, "feature shapes do not match");
    }
    std::vector<WindowFeature> out(kFacialWindowCount);
    for (int w = 0; w < kFacialWindowCount; ++w) {
        const auto& f = facial.windows[w].values;
        if (f.size() != kWindowFeatureSize) {
            throw ClipError(ClipErrorKind::ShapeMismatch, "facial window has the wrong size");
        }
        for (std::size_t i = 0; i < kWindowFeatureSize; ++i) {
            out[w].values[i] = f[i] - background.values.values[i];
        }
    }
    return out;
}

ClipTensor assemble_clip(const std::vector<FrameFeatures>& frames, int label, ChannelMode mode,
                         const std::string& video_id, int expected_frames) {
    if (static_cast<int>(frames.size()) != expected_frames) {
        throw ClipError(ClipErrorKind::WrongFrameCount,
                        "clip needs " + std::to_string(expected_frames) + " frames, got " +
                            std::to_string(frames.size()));
    }
    if (label != 0 && label != 1) {
        throw ClipError(ClipErrorKind::InvalidManifest, "label must be 0 or 1");
    }
    ClipTensor clip(channel_count(mode), expected_frames, label, video_id);
    for (int f = 0; f < expected_frames; ++f) {
        const auto& facial = frames[f].facial;
        const auto diff = difference_feature(facial, frames[f].background);
        for (int w = 0; w < kFacialWindowCount; ++w) {
            for (int u = 0; u < kWindowSize; ++u) {
                for (int t = 0; t < kDiffCount; ++t) {
                    for (int c = 0; c < kColorCount; ++c) {
                        const int ch = w * kColorCount + c;
                        clip.at(ch, f, u, t) = facial.windows[w].at(u, t, c);
                        if (mode == ChannelMode::Full96) {
                            clip.at(kFacialChannels + ch, f, u, t) = diff[w].at(u, t, c);
                        }
                    }
                }
            }
        }
    }
    return clip;
}

namespace {

constexpr unsigned char kClipMagic[4] = {'E', 'R', 'F', '1'};
constexpr std::uint8_t kClipVersion = 1;

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw ClipError(ClipErrorKind::Truncated, std::string("truncated clip: ") + what);
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const unsigned char* cursor() const { return bytes_.data() + pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_clip(const ClipTensor& clip) {
    if (clip.data.size() != static_cast<std::size_t>(clip.channels) * clip.frames * kWindowSize *
                                kDiffCount) {
        throw ClipError(ClipErrorKind::DimensionMismatch, "clip data length mismatch");
    }
    std::vector<unsigned char> out(std::begin(kClipMagic), std::end(kClipMagic));
    out.push_back(kClipVersion);
    out.push_back(static_cast<unsigned char>(clip.label));
    put_u16(out, 0);
    put_u32(out, static_cast<std::uint32_t>(clip.channels));
    put_u32(out, static_cast<std::uint32_t>(clip.frames));
    put_u32(out, kWindowSize);
    put_u32(out, kDiffCount);
    put_u32(out, static_cast<std::uint32_t>(clip.video_id.size()));
    out.insert(out.end(), clip.video_id.begin(), clip.video_id.end());
    out.reserve(out.size() + 4 * clip.data.size());
    for (double v : clip.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

ClipTensor decode_clip(const std::vector<unsigned char>& bytes) {
    ByteReader in(bytes);
    in.need(4, "magic");
    if (std::memcmp(in.cursor(), kClipMagic, 4) != 0) {
        throw ClipError(ClipErrorKind::BadMagic, "not an ERF1 clip (bad magic)");
    }
    in.skip(4);
    const auto version = in.u8("version");
    if (version != kClipVersion) {
        throw ClipError(ClipErrorKind::VersionMismatch,
                        "unsupported clip version " + std::to_string(version));
    }
    const auto label = in.u8("label");
    in.u16("reserved");
    const auto channels = in.u32("channels");
    const auto frames = in.u32("frames");
    const auto u = in.u32("u dimension");
    const auto t = in.u32("t dimension");
    if (label > 1) {
        throw ClipError(ClipErrorKind::DimensionMismatch, "label must be 0 or 1");
    }
    if ((channels != 48 && channels != 96) || frames == 0 || frames > 100000 ||
        u != kWindowSize || t != kDiffCount) {
        throw ClipError(ClipErrorKind::DimensionMismatch, "unexpected clip dimensions");
    }
    const auto id_len = in.u32("video id length");
    in.need(id_len, "video id");
    std::string id(reinterpret_cast<const char*>(in.cursor()), id_len);
    in.skip(id_len);

    // Size check before allocating, so a corrupt frame count cannot demand gigabytes.
    const std::size_t payload = std::size_t{4} * channels * frames * u * t;
    in.need(payload, "payload");
    if (in.remaining() != payload) {
        throw ClipError(ClipErrorKind::DimensionMismatch, "trailing bytes after clip payload");
    }
    ClipTensor clip(static_cast<int>(channels), static_cast<int>(frames), label, std::move(id));
    for (auto& v : clip.data) v = std::bit_cast<float>(in.u32("payload"));
    return clip;
}

void write_clip(const std::filesystem::path& path, const ClipTensor& clip) {
    const auto bytes = encode_clip(clip);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ClipError(ClipErrorKind::Io, "cannot write clip: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ClipError(ClipErrorKind::Io, "failed writing clip: " + path.string());
}

ClipTensor read_clip(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ClipError(ClipErrorKind::Io, "cannot open clip: " + path.string());
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    return decode_clip(bytes);
}

Manifest load_manifest(const std::filesystem::path& path, int min_frames) {
    std::ifstream in(path);
    if (!in) throw ClipError(ClipErrorKind::MissingFile, "cannot open manifest: " + path.string());
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    Manifest manifest;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& v : doc.at("videos")) {
            VideoEntry e;
            e.id = v.at("id").get<std::string>();
            e.label = v.at("label").get<int>();
            e.landmarks = resolve(v.at("landmarks").get<std::string>());
            for (const auto& f : v.at("frames")) e.frames.push_back(resolve(f.get<std::string>()));
            if (e.label != 0 && e.label != 1) {
                throw ClipError(ClipErrorKind::InvalidManifest, e.id + ": label must be 0 or 1");
            }
            if (static_cast<int>(e.frames.size()) < min_frames) {
                throw ClipError(ClipErrorKind::InvalidManifest,
                                e.id + ": needs at least " + std::to_string(min_frames) +
                                    " frames, has " + std::to_string(e.frames.size()));
            }
            manifest.videos.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ClipError(ClipErrorKind::InvalidManifest, path.string() + ": " + e.what());
    }
    return manifest;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        if (base.empty()) return p.generic_string();
        return p.lexically_relative(base).generic_string();
    };
    nlohmann::json doc;
    doc["videos"] = nlohmann::json::array();
    for (const auto& e : manifest.videos) {
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& f : e.frames) frames.push_back(rel(f));
        doc["videos"].push_back({{"id", e.id},
                                 {"frames", std::move(frames)},
                                 {"landmarks", rel(e.landmarks)},
                                 {"label", e.label}});
    }
    std::ofstream out(path);
    if (!out) throw ClipError(ClipErrorKind::Io, "cannot write manifest: " + path.string());
    out << doc.dump(2) << '\n';
}

ExtractionResult extract_frames(const std::vector<Raster>& frames,
                                const std::vector<LandmarkSet>& landmarks,
                                const std::string& video_id, int label,
                                const ExtractionConfig& cfg, std::uint64_t master_seed,
                                int first_frame_index) {
    if (frames.size() != landmarks.size()) {
        throw ClipError(ClipErrorKind::LandmarkMismatch, video_id + ": frame/landmark count differ");
    }
    const std::uint64_t video_hash = fnv1a64(video_id);
    ExtractionResult result;
    result.frame_offset = first_frame_index;
    std::vector<FrameFeatures> features;
    features.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const int frame_index = first_frame_index + static_cast<int>(i);
        FrameFeatures ff;
        ff.facial = facial_feature(frames[i], landmarks[i], cfg.background.window, frame_index);
        ff.background =
            background_feature(frames[i], landmarks[i], cfg.background,
                               derive_seed(master_seed, video_hash,
                                           static_cast<std::uint64_t>(frame_index)),
                               frame_index);
        result.n_sampled.push_back(ff.background.n_sampled);
        if (ff.background.n_sampled == 0) ++result.empty_edge_frames;
        result.unoriented_windows += ff.facial.unoriented_windows;
        features.push_back(std::move(ff));
    }
    result.clip = assemble_clip(features, label, cfg.channel_mode, video_id, cfg.frames_per_clip);
    return result;
}

ExtractionResult extract_video(const VideoEntry& entry, const ExtractionConfig& cfg,
                               std::uint64_t master_seed, std::optional<int> frame_offset) {
    const int count = static_cast<int>(entry.frames.size());
    if (count < cfg.frames_per_clip) {
        throw ClipError(ClipErrorKind::WrongFrameCount,
                        entry.id + ": fewer than " + std::to_string(cfg.frames_per_clip) +
                            " frames");
    }
    const int max_offset = count - cfg.frames_per_clip;
    int offset = 0;
    if (frame_offset) {
        offset = *frame_offset;
        if (offset < 0 || offset > max_offset) {
            throw ClipError(ClipErrorKind::WrongFrameCount, entry.id + ": frame offset out of range");
        }
    } else if (max_offset > 0) {
        Rng rng(derive_seed(master_seed, fnv1a64(entry.id), 0x6f6666736574ULL));
        offset = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_offset) + 1));
    }

    if (!std::filesystem::exists(entry.landmarks)) {
        throw ClipError(ClipErrorKind::MissingFile,
                        entry.id + ": missing landmark file " + entry.landmarks.string());
    }
    const auto all_landmarks = load_landmark_file(entry.landmarks);
    if (static_cast<int>(all_landmarks.size()) != count) {
        throw ClipError(ClipErrorKind::LandmarkMismatch,
                        entry.id + ": " + std::to_string(all_landmarks.size()) +
                            " landmark frames for " + std::to_string(count) + " images");
    }
    std::vector<Raster> frames;
    std::vector<LandmarkSet> landmarks;
    for (int i = offset; i < offset + cfg.frames_per_clip; ++i) {
        const auto it = all_landmarks.find(i);
        if (it == all_landmarks.end()) {
            throw ClipError(ClipErrorKind::LandmarkMismatch,
                            entry.id + ": no landmarks for frame " + std::to_string(i));
        }
        if (!std::filesystem::exists(entry.frames[i])) {
            throw ClipError(ClipErrorKind::MissingFile,
                            entry.id + ": missing frame " + entry.frames[i].string());
        }
        Raster img = load_image(entry.frames[i]);
        if (img.channels() != kColorCount) {
            throw ImageError(ImageErrorKind::WrongChannelCount,
                             entry.frames[i].string() + ": frames must be RGB");
        }
        frames.push_back(std::move(img));
        landmarks.push_back(it->second);
    }
    return extract_frames(frames, landmarks, entry.id, entry.label, cfg, master_seed, offset);
}

}  // namespace erfd
