#pragma once

#include <string>

#include "phonation/dataset.hpp"
#include "phonation/model.hpp"
#include "phonation/stft.hpp"
#include "phonation/synth.hpp"
#include "phonation/training.hpp"

namespace phonation {

// Everything a pipeline run needs, resolved from defaults <- config file <-
// command-line flags and written next to every output artifact so a run can
// be reproduced from the file alone.
struct RunConfig {
  std::uint64_t seed = 1;

  // audio front end
  int target_rate = 44100;
  double trim_threshold_db = -60.0;
  StftConfig stft;
  int mel_bands = 128;
  double f_min = 0.0;
  double f_max = 22050.0;
  bool log_compress = true;

  SegmentationConfig segmentation;
  SynthConfig synth;
  NetworkConfig network;
  TrainConfig train;

  int folds = 10;
  int parallel_folds = 1;
  double test_split = 0.2;
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

void save_run_config(const std::string& path, const RunConfig& config);
RunConfig load_run_config(const std::string& path);

// Shared by the checkpoint header.
std::string network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const std::string& text);

}  // namespace phonation
