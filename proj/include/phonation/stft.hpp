#pragma once

#include <string>
#include <vector>

#include "phonation/audio.hpp"

namespace phonation {

struct StftConfig {
  int window_size = 2048;
  double overlap_fraction = 0.125;
  std::string window_function = "hann";

  int hop() const;       // round(window_size * (1 - overlap_fraction)), >= 1
  void validate() const;
};

// Row-major [bin][frame] magnitude grid, bins 0..window_size/2 inclusive.
struct MagnitudeGrid {
  int bins = 0;
  int frames = 0;
  std::vector<double> values;

  double at(int bin, int frame) const { return values[static_cast<std::size_t>(bin) * frames + frame]; }
};

// Frame count is 1 + floor((len - window) / hop); a clip shorter than one
// window raises TooShortError.
MagnitudeGrid stft_magnitude(const AudioClip& clip, const StftConfig& config);

std::vector<double> make_window(const std::string& name, int size);

}  // namespace phonation
