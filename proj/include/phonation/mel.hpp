#pragma once

#include <string>
#include <vector>

#include "phonation/stft.hpp"

namespace phonation {

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank: rows are unimodal non-negative responses whose
// center frequencies are equally spaced on the mel scale.
struct MelFilterbank {
  int n_bands = 0;
  int bins = 0;  // window_size / 2 + 1
  std::vector<double> weights;  // row-major [band][bin]
  std::vector<double> center_frequencies_hz;
  double f_min = 0.0;
  double f_max = 0.0;
  int sample_rate = 0;
  int window_size = 0;

  double weight(int band, int bin) const {
    return weights[static_cast<std::size_t>(band) * bins + bin];
  }
};

MelFilterbank build_mel_filterbank(int window_size, int sample_rate, int n_bands = 128,
                                   double f_min = 0.0, double f_max = 22050.0);

// 128 x T grid of (optionally log(1+x)-compressed) mel-band magnitudes.
struct MelSpectrogram {
  int n_bands = 0;
  int frames = 0;
  std::vector<double> values;  // row-major [band][frame]
  double frame_hop_seconds = 0.0;
  std::string source_id;

  double at(int band, int frame) const {
    return values[static_cast<std::size_t>(band) * frames + frame];
  }
};

MelSpectrogram mel_spectrogram(const AudioClip& clip, const StftConfig& config,
                               const MelFilterbank& bank, bool log_compress = true,
                               const std::string& source_id = "");

}  // namespace phonation
