#include "erfd/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace erfd::nn {

namespace {

constexpr char kMagic[4] = {'E', 'L', 'D', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_values(std::vector<unsigned char>& out, const std::vector<double>& values) {
    for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

[[noreturn]] void mismatch(const std::string& what) {
    throw CheckpointError(CheckpointErrorKind::ArchitectureMismatch, what);
}

struct Parsed {
    nlohmann::json header;
    const unsigned char* payload = nullptr;
    std::size_t payload_size = 0;
};

Parsed parse(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        if (bytes.size() < 4 && std::equal(bytes.begin(), bytes.end(), kMagic)) {
            throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint truncated in magic");
        }
        throw CheckpointError(CheckpointErrorKind::BadMagic, "not an ELD1 checkpoint");
    }
    if (bytes.size() < 8) {
        throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint truncated in header length");
    }
    const std::uint32_t len = get_u32(bytes.data() + 4);
    if (bytes.size() - 8 < len) {
        throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint truncated in header");
    }
    Parsed p;
    try {
        p.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed,
                              std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!p.header.is_object() || !p.header.contains("config") ||
        !p.header.contains("parameters") || !p.header.contains("buffers")) {
        throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint header is incomplete");
    }
    p.payload = bytes.data() + 8 + len;
    p.payload_size = bytes.size() - 8 - len;
    return p;
}

// The stored manifest must match `model` entry for entry.
void read_into(const Parsed& p, DenseNet3d& model) {
    const auto params = model.parameters();
    const auto buffers = model.buffers();
    const auto& pj = p.header.at("parameters");
    const auto& bj = p.header.at("buffers");
    if (!pj.is_array() || !bj.is_array()) {
        throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint manifest is not a list");
    }
    if (pj.size() != params.size() || bj.size() != buffers.size()) {
        mismatch("checkpoint holds " + std::to_string(pj.size()) + " parameters, model has " +
                 std::to_string(params.size()));
    }
    std::size_t total = 0;
    try {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto shape = pj[i].at("shape").get<std::vector<int>>();
            const auto name = pj[i].at("name").get<std::string>();
            const auto& d = params[i]->value.dims();
            if (name != params[i]->name || shape != std::vector<int>(d.begin(), d.end())) {
                mismatch("parameter " + name + " does not match model parameter " +
                         params[i]->name + " " + dims_string(d));
            }
            total += params[i]->value.size();
        }
        for (std::size_t i = 0; i < buffers.size(); ++i) {
            const auto name = bj[i].at("name").get<std::string>();
            const auto length = bj[i].at("length").get<std::size_t>();
            if (name != buffers[i].name || length != buffers[i].values->size()) {
                mismatch("buffer " + name + " does not match model buffer " + buffers[i].name);
            }
            total += length;
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed,
                              std::string("checkpoint manifest entry is malformed: ") + e.what());
    }
    if (p.payload_size < total * 4) {
        throw CheckpointError(CheckpointErrorKind::Truncated,
                              "checkpoint payload holds " + std::to_string(p.payload_size / 4) +
                                  " of " + std::to_string(total) + " values");
    }
    if (p.payload_size > total * 4) {
        throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint has trailing bytes");
    }
    const unsigned char* cursor = p.payload;
    auto fill = [&](std::vector<double>& values) {
        for (auto& v : values) {
            v = static_cast<double>(std::bit_cast<float>(get_u32(cursor)));
            cursor += 4;
        }
    };
    for (Parameter* param : params) fill(param->value.data());
    for (const Buffer& b : buffers) fill(*b.values);
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

nlohmann::json net_config_to_json(const NetConfig& cfg) {
    return {
        {"growth_rate", cfg.growth_rate},
        {"block_sizes", cfg.block_sizes},
        {"in_channels", cfg.in_channels},
        {"bottleneck_factor", cfg.bottleneck_factor},
        {"compression", cfg.compression},
        {"classes", cfg.classes},
        {"input_dims", cfg.input_dims},
    };
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("net config must be a JSON object");
    NetConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "growth_rate") {
            cfg.growth_rate = value.get<int>();
        } else if (key == "block_sizes") {
            cfg.block_sizes = value.get<std::array<int, 3>>();
        } else if (key == "in_channels") {
            cfg.in_channels = value.get<int>();
        } else if (key == "bottleneck_factor") {
            cfg.bottleneck_factor = value.get<int>();
        } else if (key == "compression") {
            cfg.compression = value.get<double>();
        } else if (key == "classes") {
            cfg.classes = value.get<int>();
        } else if (key == "input_dims") {
            cfg.input_dims = value.get<std::array<int, 3>>();
        } else {
            throw std::invalid_argument("unknown net config key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

std::vector<unsigned char> encode_checkpoint(DenseNet3d& model, const nlohmann::json& run) {
    nlohmann::json header;
    header["config"] = net_config_to_json(model.config());
    header["parameters"] = nlohmann::json::array();
    for (const Parameter* p : model.parameters()) {
        const auto& d = p->value.dims();
        header["parameters"].push_back({{"name", p->name}, {"shape", d}});
    }
    header["buffers"] = nlohmann::json::array();
    for (const Buffer& b : model.buffers()) {
        header["buffers"].push_back({{"name", b.name}, {"length", b.values->size()}});
    }
    header["run"] = run;
    const std::string text = header.dump();

    std::vector<unsigned char> out(kMagic, kMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const Parameter* p : model.parameters()) put_values(out, p->value.data());
    for (const Buffer& b : model.buffers()) put_values(out, *b.values);
    return out;
}

void save_checkpoint(const std::filesystem::path& path, DenseNet3d& model,
                     const nlohmann::json& run) {
    const auto bytes = encode_checkpoint(model, run);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointErrorKind::Io, "failed writing " + path.string());
}

LoadedCheckpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
    const Parsed p = parse(bytes);
    NetConfig cfg;
    try {
        cfg = net_config_from_json(p.header.at("config"));
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed,
                              std::string("checkpoint config is invalid: ") + e.what());
    }
    LoadedCheckpoint out;
    out.model = std::make_unique<DenseNet3d>(cfg);
    read_into(p, *out.model);
    out.run = p.header.value("run", nlohmann::json::object());
    return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

void load_checkpoint_into(const std::filesystem::path& path, DenseNet3d& model) {
    const auto bytes = read_file(path);
    const Parsed p = parse(bytes);
    NetConfig stored;
    try {
        stored = net_config_from_json(p.header.at("config"));
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed,
                              std::string("checkpoint config is invalid: ") + e.what());
    }
    if (!(stored == model.config())) {
        mismatch("checkpoint architecture " + p.header.at("config").dump() +
                 " differs from the model's " + net_config_to_json(model.config()).dump());
    }
    read_into(p, model);
}

}  // namespace erfd::nn
