// erfd: synthesize corpora, extract edge-region features, analyze their
// distributions, and train / evaluate the 3-D DenseNet classifier.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "erfd/analysis.hpp"
#include "erfd/clip.hpp"
#include "erfd/config.hpp"
#include "erfd/nn/checkpoint.hpp"
#include "erfd/nn/train.hpp"
#include "erfd/parallel.hpp"
#include "erfd/random.hpp"
#include "erfd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFeatureExtension = ".erf";

// Options shared by the commands that read a run configuration.
struct ConfigOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> channel_mode;
    std::optional<std::string> scale_mode;
    std::optional<double> sample_fraction;
    std::optional<double> split;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> lr;
    std::optional<int> lr_decay_every;
    std::optional<int> growth_rate;
    std::optional<std::vector<int>> blocks;
    int workers = 1;

    void add_to(CLI::App& cmd, bool training) {
        cmd.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        cmd.add_option("--seed", seed, "Master seed (overrides the config)");
        cmd.add_option("--workers", workers, "Worker threads; results do not depend on it")
            ->check(CLI::PositiveNumber);
        if (!training) {
            cmd.add_option("--channel-mode", channel_mode, "full-96 or facial-48")
                ->check(CLI::IsMember({"full-96", "facial-48"}));
            cmd.add_option("--scale-mode", scale_mode, "as-written or area-proportional")
                ->check(CLI::IsMember({"as-written", "area-proportional"}));
            cmd.add_option("--sample-fraction", sample_fraction, "Background sampling fraction");
            return;
        }
        cmd.add_option("--split", split, "Training fraction of the per-video split");
        cmd.add_option("--epochs", epochs, "Training epochs");
        cmd.add_option("--batch-size", batch_size, "Mini-batch size");
        cmd.add_option("--lr", lr, "Initial learning rate");
        cmd.add_option("--lr-decay-every", lr_decay_every, "Epochs between learning-rate halvings");
        cmd.add_option("--growth-rate", growth_rate, "Dense block growth rate");
        cmd.add_option("--blocks", blocks, "Layers per dense block (three values)")->expected(3);
    }

    erfd::RunConfig resolve() const {
        erfd::RunConfig cfg;
        if (!config_path.empty()) cfg = erfd::load_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (channel_mode) cfg.channel_mode = erfd::parse_channel_mode(*channel_mode);
        if (scale_mode) cfg.window.scale_mode = erfd::parse_scale_mode(*scale_mode);
        if (sample_fraction) cfg.sample_fraction = *sample_fraction;
        if (split) cfg.split = *split;
        if (epochs) cfg.train.epochs = *epochs;
        if (batch_size) cfg.train.batch_size = *batch_size;
        if (lr) cfg.train.lr = *lr;
        if (lr_decay_every) cfg.train.lr_decay_every = *lr_decay_every;
        if (growth_rate) cfg.net.growth_rate = *growth_rate;
        if (blocks) std::copy(blocks->begin(), blocks->end(), cfg.net.block_sizes.begin());
        cfg.validate();
        return cfg;
    }
};

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Every *.erf file of a directory, sorted by file name.
std::vector<erfd::ClipTensor> load_features(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == kFeatureExtension) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no " + std::string(kFeatureExtension) + " files in " + dir.string());
    std::vector<erfd::ClipTensor> clips;
    for (const auto& f : files) clips.push_back(erfd::read_clip(f));
    for (const auto& c : clips) {
        if (c.channels != clips.front().channels || c.frames != clips.front().frames) {
            throw std::runtime_error("feature files mix clip shapes (" + c.video_id + " vs " +
                                     clips.front().video_id + ")");
        }
    }
    return clips;
}

std::vector<erfd::ClipTensor> select(const std::vector<erfd::ClipTensor>& clips,
                                     const std::vector<std::string>& ids) {
    std::map<std::string, const erfd::ClipTensor*> by_id;
    for (const auto& c : clips) by_id[c.video_id] = &c;
    std::vector<erfd::ClipTensor> out;
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("no feature file for video " + id);
        out.push_back(*it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int videos = 10;
    double fake_ratio = 0.5;
    std::uint64_t seed = 0;
    int frames = erfd::kClipFrames;
    int size = 128;
    int workers = 1;
};

void cmd_synth(const SynthArgs& a) {
    erfd::CorpusOptions opts;
    opts.videos = a.videos;
    opts.fake_ratio = a.fake_ratio;
    opts.seed = a.seed;
    opts.frames = a.frames;
    opts.width = a.size;
    opts.height = a.size;
    const auto manifest = erfd::make_corpus(opts, a.out, a.workers);
    std::cerr << "wrote " << manifest.videos.size() << " videos to " << a.out << '\n';
}

struct ExtractArgs {
    std::string manifest;
    std::string out;
    ConfigOptions config;
};

void cmd_extract(const ExtractArgs& a) {
    const erfd::RunConfig cfg = a.config.resolve();
    const erfd::Manifest manifest = erfd::load_manifest(a.manifest, cfg.frames_per_clip);
    fs::create_directories(a.out);
    const auto ecfg = cfg.extraction();
    std::vector<json> entries(manifest.videos.size());
    erfd::parallel_for(manifest.videos.size(), a.config.workers, [&](std::size_t i) {
        const auto& v = manifest.videos[i];
        const erfd::ExtractionResult r = erfd::extract_video(v, ecfg, cfg.seed);
        const std::string file = v.id + kFeatureExtension;
        erfd::write_clip(fs::path(a.out) / file, r.clip);
        entries[i] = {{"id", v.id},
                      {"label", v.label},
                      {"file", file},
                      {"frame_offset", r.frame_offset},
                      {"n_sampled", r.n_sampled},
                      {"empty_edge_frames", r.empty_edge_frames},
                      {"unoriented_windows", r.unoriented_windows}};
    });
    json report = {{"config", erfd::to_json(cfg)}, {"videos", entries}};
    write_json(fs::path(a.out) / "report.json", report);
    std::cerr << "extracted " << entries.size() << " clips to " << a.out << '\n';
}

struct AnalyzeArgs {
    std::string features;
    std::string out;
};

void cmd_analyze(const AnalyzeArgs& a) {
    std::vector<erfd::ProfileSample> samples;
    for (const auto& clip : load_features(a.features)) {
        const auto s = erfd::clip_profiles(clip);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    const erfd::Distribution dist = erfd::aggregate(samples);
    for (const auto& w : dist.warnings) std::cerr << "warning: " << w << '\n';
    erfd::write_distribution_csv(a.out, dist);
    std::cerr << "wrote " << dist.rows.size() << " rows to " << a.out << '\n';
}

struct TrainArgs {
    std::string features;
    std::string checkpoint;
    std::string history;
    bool quiet = false;
    ConfigOptions config;
};

void cmd_train(const TrainArgs& a) {
    erfd::RunConfig cfg = a.config.resolve();
    const auto clips = load_features(a.features);
    // The features fix the channel layout; the echoed config follows them.
    cfg.channel_mode = clips.front().mode();
    cfg.frames_per_clip = clips.front().frames;
    cfg.validate();

    std::vector<std::string> ids;
    for (const auto& c : clips) ids.push_back(c.video_id);
    const erfd::SplitAssignment split = erfd::split_videos(ids, cfg.split, cfg.seed);
    const auto train_set = select(clips, split.train);
    const auto test_set = select(clips, split.test);

    erfd::nn::DenseNet3d model(cfg.net_config());
    model.init(erfd::derive_seed(cfg.seed, erfd::fnv1a64("init")));
    erfd::nn::TrainConfig tcfg = cfg.train;
    tcfg.seed = erfd::derive_seed(cfg.seed, erfd::fnv1a64("train"));
    tcfg.threads = a.config.workers;
    const auto history = erfd::nn::train(model, train_set, test_set, tcfg,
                                         [&](const erfd::nn::EpochRecord& r) {
                                             if (a.quiet) return;
                                             std::cerr << "epoch " << r.epoch << " lr " << r.lr
                                                       << " loss " << r.train_loss << " val_auc "
                                                       << r.val_auc << '\n';
                                         });
    const json run = {{"config", erfd::to_json(cfg)},
                      {"split", {{"train", split.train}, {"test", split.test}}}};
    const fs::path ckpt(a.checkpoint);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    erfd::nn::save_checkpoint(ckpt, model, run);
    const fs::path hist = a.history.empty() ? fs::path(a.checkpoint + ".history.csv") : fs::path(a.history);
    erfd::nn::write_history_csv(hist, history);
    std::cerr << "saved " << a.checkpoint << " and " << hist.string() << '\n';
}

struct EvalArgs {
    std::string features;
    std::string checkpoint;
    std::string out;
    std::string split = "test";
    int workers = 1;
};

void cmd_eval(const EvalArgs& a) {
    auto loaded = erfd::nn::load_checkpoint(a.checkpoint);
    erfd::nn::DenseNet3d& model = *loaded.model;
    model.set_threads(a.workers);
    const auto clips = load_features(a.features);
    const auto& net = model.config();
    if (clips.front().channels != net.in_channels || clips.front().frames != net.input_dims[0]) {
        throw erfd::nn::CheckpointError(
            erfd::nn::CheckpointErrorKind::ArchitectureMismatch,
            "features have " + std::to_string(clips.front().channels) + " channels x " +
                std::to_string(clips.front().frames) + " frames; the checkpoint expects " +
                std::to_string(net.in_channels) + " x " + std::to_string(net.input_dims[0]));
    }
    std::vector<erfd::ClipTensor> chosen;
    if (a.split == "all") {
        chosen = clips;
    } else {
        const auto ids = loaded.run.at("split").at(a.split).get<std::vector<std::string>>();
        chosen = select(clips, ids);
    }
    std::vector<int> labels;
    for (const auto& c : chosen) labels.push_back(c.label);
    int batch = 20;
    if (loaded.run.contains("config")) batch = loaded.run["config"]["train"].value("batch_size", 20);
    const auto scores = erfd::nn::predict(model, chosen, batch);
    const erfd::nn::Metrics m = erfd::nn::compute_metrics(scores, labels);
    json metrics = {{"auc", m.auc},
                    {"accuracy", m.accuracy},
                    {"confusion",
                     {{"true_positive", m.true_positive},
                      {"true_negative", m.true_negative},
                      {"false_positive", m.false_positive},
                      {"false_negative", m.false_negative}}},
                    {"n", chosen.size()},
                    {"split", a.split},
                    {"config", loaded.run.value("config", json::object())}};
    write_json(a.out, metrics);
    std::cerr << "auc " << m.auc << " accuracy " << m.accuracy << " on " << chosen.size()
              << " videos\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edge-region facial forgery detection toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic real/fake corpus");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--videos", synth.videos, "Number of videos")->check(CLI::Range(2, 100000));
    s->add_option("--fake-ratio", synth.fake_ratio, "Fraction of fake videos");
    s->add_option("--seed", synth.seed, "Generator seed");
    s->add_option("--frames", synth.frames, "Frames per video (>= 24)");
    s->add_option("--size", synth.size, "Frame width and height in pixels");
    s->add_option("--workers", synth.workers, "Worker threads")->check(CLI::PositiveNumber);

    ExtractArgs extract;
    auto* e = app.add_subcommand("extract", "Extract one clip tensor per video");
    e->add_option("--manifest", extract.manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
    e->add_option("--out", extract.out, "Feature directory")->required();
    extract.config.add_to(*e, false);

    AnalyzeArgs analyze;
    auto* an = app.add_subcommand("analyze", "Per-group feature distributions as CSV");
    an->add_option("--features", analyze.features, "Feature directory")->required();
    an->add_option("--out", analyze.out, "CSV path")->required();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the classifier on the training split");
    t->add_option("--features", train.features, "Feature directory")->required();
    t->add_option("--checkpoint", train.checkpoint, "Checkpoint path")->required();
    t->add_option("--history", train.history, "History CSV (default: <checkpoint>.history.csv)");
    t->add_flag("--quiet", train.quiet, "Do not print per-epoch progress");
    train.config.add_to(*t, true);

    EvalArgs eval;
    auto* ev = app.add_subcommand("eval", "Score a split and write metrics JSON");
    ev->add_option("--features", eval.features, "Feature directory")->required();
    ev->add_option("--checkpoint", eval.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eval.out, "Metrics JSON path")->required();
    ev->add_option("--split", eval.split, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
    ev->add_option("--workers", eval.workers, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    try {
        if (*s) cmd_synth(synth);
        if (*e) cmd_extract(extract);
        if (*an) cmd_analyze(analyze);
        if (*t) cmd_train(train);
        if (*ev) cmd_eval(eval);
    } catch (const std::exception& err) {
        std::cerr << "erfd: error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
