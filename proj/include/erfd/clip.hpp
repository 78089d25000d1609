#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "erfd/background_features.hpp"
#include "erfd/facial_features.hpp"

namespace erfd {

inline constexpr int kClipFrames = 24;
inline constexpr int kFacialChannels = kFacialWindowCount * kColorCount;  // 48

enum class ChannelMode { Full96, Facial48 };

ChannelMode parse_channel_mode(const std::string& name);
std::string to_string(ChannelMode mode);
int channel_count(ChannelMode mode);

/// Classifier input: channel x frame x u x t. Channels 0..47 hold the facial
/// differences (window * 3 + color); 48..95 hold the matching facial minus
/// background differences.
struct ClipTensor {
    int channels = 0;
    int frames = 0;
    std::vector<double> data;
    int label = 0;
    std::string video_id;

    ClipTensor() = default;
    ClipTensor(int channels, int frames, int label, std::string video_id);

    ChannelMode mode() const;
    std::size_t index(int ch, int frame, int u, int t) const {
        return ((static_cast<std::size_t>(ch) * frames + frame) * kWindowSize + u) * kDiffCount + t;
    }
    double& at(int ch, int frame, int u, int t) { return data[index(ch, frame, u, t)]; }
    double at(int ch, int frame, int u, int t) const { return data[index(ch, frame, u, t)]; }
};

enum class ClipErrorKind {
    BadMagic,
    VersionMismatch,
    Truncated,
    DimensionMismatch,
    ShapeMismatch,
    WrongFrameCount,
    Io,
    InvalidManifest,
    MissingFile,
    LandmarkMismatch,
};

class ClipError : public std::runtime_error {
public:
    ClipError(ClipErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ClipErrorKind kind() const { return kind_; }

private:
    ClipErrorKind kind_;
};

/// Per window: facial differences minus the background block.
std::vector<WindowFeature> difference_feature(const FacialFeature& facial,
                                              const BackgroundFeature& background);

struct FrameFeatures {
    FacialFeature facial;
    BackgroundFeature background;
};

ClipTensor assemble_clip(const std::vector<FrameFeatures>& frames, int label, ChannelMode mode,
                         const std::string& video_id = {}, int expected_frames = kClipFrames);

/// ERF1: "ERF1", u8 version, u8 label, u16 reserved, u32 x4 dims
/// (channels, frames, u, t), u32 id length + UTF-8 id, then float32 values
/// in C order. All integers and floats little-endian.
void write_clip(const std::filesystem::path& path, const ClipTensor& clip);
ClipTensor read_clip(const std::filesystem::path& path);
std::vector<unsigned char> encode_clip(const ClipTensor& clip);
ClipTensor decode_clip(const std::vector<unsigned char>& bytes);

struct VideoEntry {
    std::string id;
    std::vector<std::filesystem::path> frames;
    std::filesystem::path landmarks;
    int label = 0;
};

struct Manifest {
    std::vector<VideoEntry> videos;
};

/// Relative paths are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path, int min_frames = kClipFrames);
/// Paths are written relative to the manifest's directory when possible.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct ExtractionConfig {
    BackgroundConfig background;
    ChannelMode channel_mode = ChannelMode::Full96;
    int frames_per_clip = kClipFrames;
};

struct ExtractionResult {
    ClipTensor clip;
    int frame_offset = 0;
    std::vector<int> n_sampled;         // per clip frame
    int empty_edge_frames = 0;
    int unoriented_windows = 0;
};

/// Full per-frame pipeline on an in-memory frame sequence.
ExtractionResult extract_frames(const std::vector<Raster>& frames,
                                const std::vector<LandmarkSet>& landmarks,
                                const std::string& video_id, int label,
                                const ExtractionConfig& cfg, std::uint64_t master_seed,
                                int first_frame_index = 0);

/// Picks the clip offset uniformly from the seed unless `frame_offset` is set.
ExtractionResult extract_video(const VideoEntry& entry, const ExtractionConfig& cfg,
                               std::uint64_t master_seed,
                               std::optional<int> frame_offset = std::nullopt);

}  // namespace erfd
