#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

#include "erfd/nn/densenet.hpp"
#include "json.hpp"

namespace erfd::nn {

enum class CheckpointErrorKind { BadMagic, Truncated, ArchitectureMismatch, Malformed, Io };

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

private:
    CheckpointErrorKind kind_;
};

nlohmann::json net_config_to_json(const NetConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
NetConfig net_config_from_json(const nlohmann::json& j);

/// ELD1: "ELD1", u32 header length, JSON header {config, parameters:
/// [{name, shape}], buffers: [{name, length}], run}, then float32 values of
/// every parameter and buffer in header order. Little-endian throughout.
/// `run` carries caller metadata (the effective run configuration).
std::vector<unsigned char> encode_checkpoint(DenseNet3d& model,
                                             const nlohmann::json& run = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, DenseNet3d& model,
                     const nlohmann::json& run = nlohmann::json::object());

struct LoadedCheckpoint {
    std::unique_ptr<DenseNet3d> model;
    nlohmann::json run;
};

LoadedCheckpoint decode_checkpoint(const std::vector<unsigned char>& bytes);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads into an existing model; the stored architecture must equal the model's.
void load_checkpoint_into(const std::filesystem::path& path, DenseNet3d& model);

}  // namespace erfd::nn
