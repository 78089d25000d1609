#include "erfd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "erfd/random.hpp"

namespace erfd {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw std::invalid_argument("unknown " + where + " key: " + key);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("config: ") + what);
    };
    require(window.alpha > 0.0 && std::isfinite(window.alpha), "alpha must be positive");
    require(window.beta > 0.0 && std::isfinite(window.beta), "beta must be positive");
    require(window.reference_area > 0.0, "reference_area must be positive");
    require(canny.low >= 0.0 && canny.low <= canny.high, "canny thresholds need 0 <= low <= high");
    require(sample_fraction > 0.0 && sample_fraction <= 1.0, "sample_fraction must be in (0, 1]");
    require(image_blur_kernel >= 1 && image_blur_kernel % 2 == 1, "image_blur_kernel must be odd");
    require(mask_blur_kernel >= 1 && mask_blur_kernel % 2 == 1, "mask_blur_kernel must be odd");
    require(frames_per_clip >= 1, "frames_per_clip must be >= 1");
    require(split > 0.0 && split < 1.0, "split must be in (0, 1)");
    net_config().validate();
    train.validate();
}

ExtractionConfig RunConfig::extraction() const {
    ExtractionConfig e;
    e.background.window = window;
    e.background.canny = canny;
    e.background.sample_fraction = sample_fraction;
    e.background.image_blur_kernel = image_blur_kernel;
    e.background.mask_blur_kernel = mask_blur_kernel;
    e.channel_mode = channel_mode;
    e.frames_per_clip = frames_per_clip;
    return e;
}

nn::NetConfig RunConfig::net_config() const {
    nn::NetConfig n = net;
    n.in_channels = channel_count(channel_mode);
    n.input_dims = {frames_per_clip, kWindowSize, kDiffCount};
    return n;
}

json to_json(const RunConfig& cfg) {
    return {
        {"alpha", cfg.window.alpha},
        {"beta", cfg.window.beta},
        {"scale_mode", to_string(cfg.window.scale_mode)},
        {"reference_area", cfg.window.reference_area},
        {"canny", {{"low", cfg.canny.low}, {"high", cfg.canny.high}}},
        {"sample_fraction", cfg.sample_fraction},
        {"image_blur_kernel", cfg.image_blur_kernel},
        {"mask_blur_kernel", cfg.mask_blur_kernel},
        {"frames_per_clip", cfg.frames_per_clip},
        {"channel_mode", to_string(cfg.channel_mode)},
        {"net",
         {{"growth_rate", cfg.net.growth_rate},
          {"block_sizes", cfg.net.block_sizes},
          {"bottleneck_factor", cfg.net.bottleneck_factor},
          {"compression", cfg.net.compression}}},
        {"train",
         {{"epochs", cfg.train.epochs},
          {"batch_size", cfg.train.batch_size},
          {"lr", cfg.train.lr},
          {"lr_decay_every", cfg.train.lr_decay_every},
          {"lr_decay_factor", cfg.train.lr_decay_factor}}},
        {"seed", cfg.seed},
        {"split", cfg.split},
    };
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    reject_unknown(j,
                   {"alpha", "beta", "scale_mode", "reference_area", "canny", "sample_fraction",
                    "image_blur_kernel", "mask_blur_kernel", "frames_per_clip", "channel_mode",
                    "net", "train", "seed", "split"},
                   "config");
    RunConfig cfg;
    try {
        read(j, "alpha", cfg.window.alpha);
        read(j, "beta", cfg.window.beta);
        if (j.contains("scale_mode")) {
            cfg.window.scale_mode = parse_scale_mode(j.at("scale_mode").get<std::string>());
        }
        read(j, "reference_area", cfg.window.reference_area);
        if (j.contains("canny")) {
            const auto& c = j.at("canny");
            reject_unknown(c, {"low", "high"}, "canny");
            read(c, "low", cfg.canny.low);
            read(c, "high", cfg.canny.high);
        }
        read(j, "sample_fraction", cfg.sample_fraction);
        read(j, "image_blur_kernel", cfg.image_blur_kernel);
        read(j, "mask_blur_kernel", cfg.mask_blur_kernel);
        read(j, "frames_per_clip", cfg.frames_per_clip);
        if (j.contains("channel_mode")) {
            cfg.channel_mode = parse_channel_mode(j.at("channel_mode").get<std::string>());
        }
        if (j.contains("net")) {
            const auto& n = j.at("net");
            reject_unknown(n, {"growth_rate", "block_sizes", "bottleneck_factor", "compression"},
                           "net");
            read(n, "growth_rate", cfg.net.growth_rate);
            read(n, "block_sizes", cfg.net.block_sizes);
            read(n, "bottleneck_factor", cfg.net.bottleneck_factor);
            read(n, "compression", cfg.net.compression);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t, {"epochs", "batch_size", "lr", "lr_decay_every", "lr_decay_factor"},
                           "train");
            read(t, "epochs", cfg.train.epochs);
            read(t, "batch_size", cfg.train.batch_size);
            read(t, "lr", cfg.train.lr);
            read(t, "lr_decay_every", cfg.train.lr_decay_every);
            read(t, "lr_decay_factor", cfg.train.lr_decay_factor);
        }
        read(j, "seed", cfg.seed);
        read(j, "split", cfg.split);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config has a value of the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

SplitAssignment split_videos(std::vector<std::string> ids, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split fraction must be in (0, 1)");
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("split: duplicate video id");
    }
    Rng rng(derive_seed(seed, fnv1a64("split")));
    rng.shuffle(ids);
    const auto n = static_cast<long>(ids.size());
    long n_train = std::lround(fraction * static_cast<double>(n));
    if (n >= 2) n_train = std::clamp(n_train, 1L, n - 1);
    SplitAssignment s;
    s.train.assign(ids.begin(), ids.begin() + n_train);
    s.test.assign(ids.begin() + n_train, ids.end());
    return s;
}

}  // namespace erfd
