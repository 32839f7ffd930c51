// Command-line front end: synthesize data, preprocess audio into mel
// segments, train with cross-validation, evaluate checkpoints, and export
// class activation heatmaps.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "phonation/audio.hpp"
#include "phonation/checkpoint.hpp"
#include "phonation/dataset.hpp"
#include "phonation/errors.hpp"
#include "phonation/gradcam.hpp"
#include "phonation/mel.hpp"
#include "phonation/model.hpp"
#include "phonation/run_config.hpp"
#include "phonation/segment_io.hpp"
#include "phonation/synth.hpp"
#include "phonation/training.hpp"

namespace fs = std::filesystem;
using namespace phonation;

namespace {

std::uint64_t env_seed_fallback() {
  if (const char* env = std::getenv("PHONATION_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw ConfigError("PHONATION_SEED is not an integer");
    }
  }
  return 1;
}

RunConfig base_config(const std::string& config_path) {
  RunConfig cfg;
  cfg.seed = env_seed_fallback();
  if (!config_path.empty()) {
    const std::uint64_t fallback = cfg.seed;
    cfg = load_run_config(config_path);
    if (cfg.seed == 0) cfg.seed = fallback;
  }
  return cfg;
}

// Propagates the top-level seed into the stage seeds unless a stage already
// pinned its own.
void resolve_seeds(RunConfig& cfg) {
  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.network.init_seed = cfg.seed;
}

MelFilterbank build_bank(const RunConfig& cfg) {
  return build_mel_filterbank(cfg.stft.window_size, cfg.target_rate, cfg.mel_bands, cfg.f_min,
                              cfg.f_max);
}

MelSpectrogram preprocess_clip(const AudioClip& raw, const RunConfig& cfg,
                               const MelFilterbank& bank, const std::string& id) {
  AudioClip clip = resample(raw, cfg.target_rate);
  clip = trim_silence(clip, cfg.trim_threshold_db);
  return mel_spectrogram(clip, cfg.stft, bank, cfg.log_compress, id);
}

int cmd_synth(const std::string& out_dir, int clips, const RunConfig& cfg) {
  fs::create_directories(out_dir);
  const auto dataset = synthesize_dataset(cfg.synth, clips);
  std::vector<LabeledClip> manifest;
  for (const auto& clip : dataset) {
    write_wav((fs::path(out_dir) / clip.label.path).string(), clip.audio);
    manifest.push_back(clip.label);
  }
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  save_run_config((fs::path(out_dir) / "run_config.json").string(), cfg);
  std::cout << "wrote " << dataset.size() << " clips + manifest.csv to " << out_dir << "\n";
  return 0;
}

int cmd_preprocess(const std::string& manifest_path, const std::string& out_dir,
                   const RunConfig& cfg) {
  const auto clips = load_manifest(manifest_path);
  if (clips.empty()) throw ManifestError("manifest lists no clips");
  const fs::path base = fs::path(manifest_path).parent_path();
  const MelFilterbank bank = build_bank(cfg);

  // Stratified deterministic split: per mode, shuffle then hold out the tail.
  std::vector<bool> is_test(clips.size(), false);
  for (int mode = 0; mode < kNumModes; ++mode) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      if (static_cast<int>(clips[i].mode) == mode) members.push_back(i);
    }
    std::mt19937_64 rng(cfg.seed * 4 + static_cast<std::uint64_t>(mode));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng() % i]);
    }
    const auto n_test = static_cast<std::size_t>(cfg.test_split * members.size() + 0.5);
    for (std::size_t i = 0; i < n_test && i < members.size(); ++i) {
      is_test[members[members.size() - 1 - i]] = true;
    }
  }

  std::vector<Segment> train_segments, test_segments;
  int skipped = 0, train_clip_count = 0, test_clip_count = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const fs::path wav = fs::path(clips[i].path).is_absolute()
                             ? fs::path(clips[i].path)
                             : base / clips[i].path;
    AudioClip raw = read_wav(wav.string());
    MelSpectrogram spec;
    try {
      spec = preprocess_clip(raw, cfg, bank, clips[i].path);
    } catch (const AllSilentError&) {
      std::cerr << "warning: skipping all-silent clip " << clips[i].path << "\n";
      ++skipped;
      continue;
    }
    if (is_test[i]) {
      try {
        test_segments.push_back(segment_for_test(spec, clips[i].mode, cfg.segmentation));
        ++test_clip_count;
      } catch (const TooShortError&) {
        std::cerr << "warning: skipping too-short test clip " << clips[i].path << "\n";
        ++skipped;
      }
    } else {
      auto result = segment_for_training(spec, clips[i].mode, cfg.segmentation);
      if (result.skipped) {
        std::cerr << "warning: skipping too-short training clip " << clips[i].path << "\n";
        ++skipped;
        continue;
      }
      ++train_clip_count;
      for (auto& seg : result.segments) train_segments.push_back(std::move(seg));
    }
  }
  if (train_segments.empty() && test_segments.empty()) {
    throw Error("every clip was skipped; nothing to write");
  }

  fs::create_directories(out_dir);
  if (!train_segments.empty()) {
    save_segments((fs::path(out_dir) / "train.segs").string(), train_segments);
  }
  if (!test_segments.empty()) {
    save_segments((fs::path(out_dir) / "test.segs").string(), test_segments);
  }
  save_run_config((fs::path(out_dir) / "run_config.json").string(), cfg);
  std::cout << "training clips " << train_clip_count << " -> " << train_segments.size()
            << " augmented segments; test clips " << test_clip_count << " -> "
            << test_segments.size() << " segments; skipped " << skipped << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, RunConfig cfg) {
  const auto train_segments = load_segments((fs::path(data_dir) / "train.segs").string());
  const auto test_segments = load_segments((fs::path(data_dir) / "test.segs").string());

  PreparedData data;
  data.train_clips = group_by_clip(train_segments);
  data.test_segments = test_segments;
  data.bands = train_segments.front().n_bands;
  data.frames = train_segments.front().frames;
  cfg.network.input_bands = data.bands;
  cfg.network.input_frames = data.frames;

  std::vector<LabeledClip> clip_list;
  for (const auto& c : data.train_clips) {
    clip_list.push_back(LabeledClip{c.id, c.mode, "", ""});
  }
  const FoldSplit folds = make_folds(clip_list, cfg.folds, cfg.seed);

  const auto result = cross_validate(data, folds, cfg.network, cfg.train, cfg.parallel_folds);

  fs::create_directories(out_dir);
  for (auto& fold : result.folds) {
    auto model = fold.model;
    const auto record =
        make_checkpoint(model, fold.adam, cfg.train,
                        static_cast<int>(fold.history.epochs.size()),
                        fold.history.final_rng_state);
    save_checkpoint((fs::path(out_dir) / ("fold" + std::to_string(fold.fold) + ".ckpt")).string(),
                    record);
  }
  const std::string report = format_report(result.report);
  std::ofstream metrics((fs::path(out_dir) / "metrics.txt").string(), std::ios::trunc);
  metrics << report;
  metrics.close();
  save_run_config((fs::path(out_dir) / "run_config.json").string(), cfg);
  std::cout << report;
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir) {
  const CheckpointRecord record = load_checkpoint(checkpoint_path);
  const PhonationNet net = restore_network(record);
  const auto test_segments = load_segments((fs::path(data_dir) / "test.segs").string());
  std::vector<const Segment*> test;
  for (const auto& s : test_segments) test.push_back(&s);
  const ConfusionMatrix cm = evaluate(net, test, record.train.batch_size);
  const MetricsSummary m = metrics_from_confusion(cm, record.train.f_average);
  std::cout << format_confusion(cm);
  char line[120];
  std::snprintf(line, sizeof line, "accuracy %.4f | F %.4f\n", m.accuracy, m.f_measure);
  std::cout << line;
  return 0;
}

int cmd_gradcam(const std::string& checkpoint_path, const std::string& wav_path,
                const std::string& mode_name_arg, const std::vector<std::string>& layers,
                const std::string& out_dir, const RunConfig& cfg) {
  const PhonationMode mode = parse_mode(mode_name_arg);
  const CheckpointRecord record = load_checkpoint(checkpoint_path);
  const PhonationNet net = restore_network(record);

  const MelFilterbank bank = build_bank(cfg);
  const AudioClip raw = read_wav(wav_path);
  const std::string stem = fs::path(wav_path).stem().string();
  const MelSpectrogram spec = preprocess_clip(raw, cfg, bank, stem);
  const Segment seg = segment_for_test(spec, mode, cfg.segmentation);

  if (seg.n_bands != record.config.input_bands || seg.frames != record.config.input_frames) {
    throw ConfigError("checkpoint expects " + std::to_string(record.config.input_bands) + "x" +
                      std::to_string(record.config.input_frames) + " segments");
  }
  Tensor input = Tensor::from_data({1, 1, seg.n_bands, seg.frames}, seg.values);

  MelSpectrogram window;  // the exact window the network saw, for the underlay
  window.n_bands = seg.n_bands;
  window.frames = seg.frames;
  window.values = seg.values;
  window.frame_hop_seconds = spec.frame_hop_seconds;
  window.source_id = stem;

  fs::create_directories(out_dir);
  for (const auto& layer_name : layers) {
    const ConvTap tap = parse_conv_tap(layer_name);
    ActivationMap map = grad_cam(net, input, static_cast<int>(mode), tap);
    map.source_id = stem;
    const HeatmapImage img = overlay_and_upsample(map, window);
    const std::string file = stem + "_" + phonation::mode_name(mode) + "_" + layer_name + ".pgm";
    export_image(img, (fs::path(out_dir) / file).string());
    std::cout << "wrote " << file << "\n";
  }
  save_run_config((fs::path(out_dir) / "run_config.json").string(), cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonation-mode classification pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration (flags override it)")
      ->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic four-class dataset");
  std::string synth_out;
  int synth_clips = 8;
  std::uint64_t seed_flag = 0;
  std::string duration_range;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--clips", synth_clips, "number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed_flag, "random seed");
  synth->add_option("--duration-range", duration_range, "clip duration LO:HI seconds");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "decode, resample, trim, mel, segment");
  std::string pre_manifest, pre_out;
  double test_split = -1.0;
  pre->add_option("--manifest", pre_manifest, "manifest csv")->required()
      ->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "output directory")->required();
  pre->add_option("--test-split", test_split, "held-out test fraction")
      ->check(CLI::Range(0.0, 0.9));
  pre->add_option("--seed", seed_flag, "random seed");

  // train
  auto* train = app.add_subcommand("train", "cross-validated training");
  std::string train_data, train_out;
  int folds_flag = 0, epochs_flag = -1, parallel_flag = 0;
  train->add_option("--data", train_data, "preprocessed segment directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--folds", folds_flag, "fold count");
  train->add_option("--epochs", epochs_flag, "epochs per fold");
  train->add_option("--seed", seed_flag, "random seed");
  train->add_option("--parallel-folds", parallel_flag, "fold contexts to run concurrently");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  std::string eval_ckpt, eval_data;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "preprocessed segment directory")->required();

  // gradcam
  auto* cam = app.add_subcommand("gradcam", "export class activation heatmaps for one clip");
  std::string cam_ckpt, cam_wav, cam_class, cam_out;
  std::vector<std::string> cam_layers;
  cam->add_option("--checkpoint", cam_ckpt, "checkpoint file")->required()
      ->check(CLI::ExistingFile);
  cam->add_option("--input", cam_wav, "wav file")->required()->check(CLI::ExistingFile);
  cam->add_option("--class", cam_class, "target phonation mode")->required();
  cam->add_option("--layer", cam_layers, "conv layer tap (repeatable)");
  cam->add_option("--out", cam_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = base_config(config_path);
    if (seed_flag != 0) cfg.seed = seed_flag;

    if (app.got_subcommand(synth)) {
      if (!duration_range.empty()) {
        const auto colon = duration_range.find(':');
        if (colon == std::string::npos) throw ConfigError("--duration-range wants LO:HI");
        cfg.synth.duration_min_s = std::stod(duration_range.substr(0, colon));
        cfg.synth.duration_max_s = std::stod(duration_range.substr(colon + 1));
      }
      resolve_seeds(cfg);
      return cmd_synth(synth_out, synth_clips, cfg);
    }
    if (app.got_subcommand(pre)) {
      if (test_split >= 0.0) cfg.test_split = test_split;
      resolve_seeds(cfg);
      return cmd_preprocess(pre_manifest, pre_out, cfg);
    }
    if (app.got_subcommand(train)) {
      if (folds_flag > 0) cfg.folds = folds_flag;
      if (epochs_flag >= 0) cfg.train.epochs = epochs_flag;
      if (parallel_flag > 0) cfg.parallel_folds = parallel_flag;
      resolve_seeds(cfg);
      return cmd_train(train_data, train_out, cfg);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(eval_ckpt, eval_data);
    }
    if (app.got_subcommand(cam)) {
      if (cam_layers.empty()) cam_layers = {"conv3", "conv4"};
      return cmd_gradcam(cam_ckpt, cam_wav, cam_class, cam_layers, cam_out, cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
