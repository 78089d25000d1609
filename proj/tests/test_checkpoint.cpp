#include <gtest/gtest.h>

#include <cmath>

#include "erfd/nn/checkpoint.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace erfd;
using namespace erfd::nn;
using erfd::testing::random_tensor;
using erfd::testing::read_bytes;
using erfd::testing::TempDir;
using erfd::testing::tiny_net_config;
using erfd::testing::write_bytes;

namespace {

CheckpointErrorKind checkpoint_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a CheckpointError";
    return CheckpointErrorKind::Io;
}

/// A model whose BN running statistics are no longer the defaults.
std::unique_ptr<DenseNet3d> trained_tiny(std::uint64_t seed) {
    auto model = std::make_unique<DenseNet3d>(tiny_net_config());
    model->init(seed);
    Rng rng(seed);
    for (int i = 0; i < 3; ++i) model->forward(random_tensor({2, 4, 4, 6, 5}, rng), Mode::Train);
    return model;
}

std::vector<unsigned char> with_header(const std::vector<unsigned char>& bytes,
                                       const std::function<void(nlohmann::json&)>& edit) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
    auto header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    edit(header);
    const std::string text = header.dump();
    std::vector<unsigned char> out(bytes.begin(), bytes.begin() + 4);
    const auto n = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((n >> (8 * i)) & 0xff));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), bytes.begin() + 8 + len, bytes.end());
    return out;
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesEvalLogits) {
    TempDir dir("ckpt");
    auto model = trained_tiny(1);
    Rng rng(2);
    const Tensor5 x = random_tensor({3, 4, 4, 6, 5}, rng);
    const Tensor5 before = model->forward(x, Mode::Eval);
    save_checkpoint(dir / "m.eld", *model, {{"note", "tiny"}});
    const LoadedCheckpoint loaded = load_checkpoint(dir / "m.eld");
    EXPECT_EQ(loaded.model->config(), model->config());
    EXPECT_EQ(loaded.run.at("note"), "tiny");
    const Tensor5 after = loaded.model->forward(x, Mode::Eval);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(after.data()[i], before.data()[i], 1e-6);

    // Values are stored at float precision and come back bit-exact from there.
    const auto params = model->parameters();
    const auto back = loaded.model->parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k]->value.size(); ++i) {
            ASSERT_EQ(back[k]->value.data()[i], static_cast<double>(static_cast<float>(params[k]->value.data()[i])));
        }
    }
    auto buffers = model->buffers();
    auto back_buffers = loaded.model->buffers();
    for (std::size_t k = 0; k < buffers.size(); ++k) {
        for (std::size_t i = 0; i < buffers[k].values->size(); ++i) {
            ASSERT_EQ((*back_buffers[k].values)[i], static_cast<double>(static_cast<float>((*buffers[k].values)[i])));
        }
    }
    // Re-encoding a decoded checkpoint is lossless.
    EXPECT_EQ(encode_checkpoint(*loaded.model, loaded.run), read_bytes(dir / "m.eld"));
}

TEST(Checkpoint, SavesAreByteIdentical) {
    TempDir dir("ckpt");
    auto model = trained_tiny(3);
    save_checkpoint(dir / "a.eld", *model);
    save_checkpoint(dir / "b.eld", *model);
    EXPECT_EQ(read_bytes(dir / "a.eld"), read_bytes(dir / "b.eld"));
    const auto bytes = read_bytes(dir / "a.eld");
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ELD1");
}

TEST(Checkpoint, WrongShapeIsArchitectureMismatch) {
    auto model = trained_tiny(4);
    const auto good = encode_checkpoint(*model);
    const auto bad = with_header(good, [](nlohmann::json& h) {
        h["parameters"][0]["shape"] = {8, 4, 3, 3, 1};
    });
    EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(bad); }), CheckpointErrorKind::ArchitectureMismatch);
    const auto renamed = with_header(good, [](nlohmann::json& h) { h["parameters"][1]["name"] = "x"; });
    EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(renamed); }), CheckpointErrorKind::ArchitectureMismatch);

    TempDir dir("ckpt");
    save_checkpoint(dir / "tiny.eld", *model);
    NetConfig other = tiny_net_config();
    other.growth_rate = 6;
    DenseNet3d different(other);
    EXPECT_EQ(checkpoint_error([&] { load_checkpoint_into(dir / "tiny.eld", different); }),
              CheckpointErrorKind::ArchitectureMismatch);
    DenseNet3d same(tiny_net_config());
    load_checkpoint_into(dir / "tiny.eld", same);
    EXPECT_EQ(encode_checkpoint(same), encode_checkpoint(*model));
}

TEST(Checkpoint, CorruptionKinds) {
    auto model = trained_tiny(5);
    const auto good = encode_checkpoint(*model);
    auto magic = good;
    magic[0] = 'X';
    EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(magic); }), CheckpointErrorKind::BadMagic);
    for (std::size_t keep : {std::size_t{0}, std::size_t{2}, std::size_t{6}, std::size_t{40},
                             good.size() - 4, good.size() - 1}) {
        const std::vector<unsigned char> cut(good.begin(), good.begin() + keep);
        EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(cut); }), CheckpointErrorKind::Truncated)
            << keep;
    }
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(trailing); }), CheckpointErrorKind::Malformed);
    auto garbled = good;
    garbled[8] = '!';
    EXPECT_EQ(checkpoint_error([&] { decode_checkpoint(garbled); }), CheckpointErrorKind::Malformed);
    EXPECT_EQ(checkpoint_error([] { load_checkpoint("/nonexistent/dir/m.eld"); }),
              CheckpointErrorKind::Io);
}

TEST(Checkpoint, NetConfigJson) {
    NetConfig cfg;
    cfg.growth_rate = 8;
    cfg.block_sizes = {2, 2, 2};
    cfg.in_channels = 48;
    EXPECT_EQ(net_config_from_json(net_config_to_json(cfg)), cfg);
    auto j = net_config_to_json(cfg);
    j["dropout"] = 0.5;
    EXPECT_THROW(net_config_from_json(j), std::invalid_argument);
}
