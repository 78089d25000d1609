#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "erfd/clip.hpp"
#include "erfd/nn/densenet.hpp"
#include "erfd/nn/train.hpp"
#include "json.hpp"

namespace erfd {

/// Every tunable of the pipeline in one place. Worker counts are not part of
/// it: they never change results.
struct RunConfig {
    WindowConfig window;
    CannyThresholds canny;
    double sample_fraction = 0.1;
    int image_blur_kernel = 5;
    int mask_blur_kernel = 15;
    int frames_per_clip = kClipFrames;
    ChannelMode channel_mode = ChannelMode::Full96;
    nn::NetConfig net;     // in_channels and input_dims follow channel_mode / frames_per_clip
    nn::TrainConfig train; // seed and threads are filled in by the caller
    std::uint64_t seed = 0;
    double split = 0.8;

    void validate() const;
    ExtractionConfig extraction() const;
    /// `net` with in_channels and input_dims derived from the clip layout.
    nn::NetConfig net_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Keys absent from `j` keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct SplitAssignment {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Per-video split: ids are sorted, shuffled with a generator seeded from
/// `seed`, and the first round(fraction * n) go to training. Both sides keep
/// at least one video when n >= 2.
SplitAssignment split_videos(std::vector<std::string> ids, double fraction, std::uint64_t seed);

}  // namespace erfd
