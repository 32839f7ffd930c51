#include "phonation/stft.hpp"

#include <cmath>
#include <complex>

#include "phonation/errors.hpp"
#include "phonation/fft.hpp"

namespace phonation {

int StftConfig::hop() const {
  return static_cast<int>(std::lround(window_size * (1.0 - overlap_fraction)));
}

void StftConfig::validate() const {
  if (window_size < 2) throw ConfigError("stft: window_size must be >= 2");
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
    throw ConfigError("stft: overlap_fraction must be in [0, 1)");
  }
  if (hop() < 1) throw ConfigError("stft: derived hop must be >= 1");
  if (window_function != "hann" && window_function != "rectangular") {
    throw ConfigError("stft: unknown window function '" + window_function + "'");
  }
}

std::vector<double> make_window(const std::string& name, int size) {
  std::vector<double> w(static_cast<std::size_t>(size), 1.0);
  if (name == "hann") {
    for (int i = 0; i < size; ++i) {
      w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / size);
    }
  } else if (name != "rectangular") {
    throw ConfigError("unknown window function '" + name + "'");
  }
  return w;
}

namespace {

// DFT magnitudes of one windowed frame; radix-2 FFT for power-of-two sizes,
// direct evaluation otherwise.
void frame_magnitudes(const std::vector<double>& windowed, double* out, int bins) {
  const std::size_t n = windowed.size();
  if (is_power_of_two(n)) {
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = {windowed[i], 0.0};
    fft_inplace(buf);
    for (int k = 0; k < bins; ++k) out[k] = std::abs(buf[static_cast<std::size_t>(k)]);
  } else {
    for (int k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      const double step = -2.0 * M_PI * k / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        re += windowed[i] * std::cos(step * static_cast<double>(i));
        im += windowed[i] * std::sin(step * static_cast<double>(i));
      }
      out[k] = std::hypot(re, im);
    }
  }
}

}  // namespace

MagnitudeGrid stft_magnitude(const AudioClip& clip, const StftConfig& config) {
  config.validate();
  const int window = config.window_size;
  const int hop = config.hop();
  const std::int64_t len = static_cast<std::int64_t>(clip.samples.size());
  if (len < window) {
    throw TooShortError("stft: clip of " + std::to_string(len) + " samples needs at least " +
                        std::to_string(window));
  }

  MagnitudeGrid grid;
  grid.bins = window / 2 + 1;
  grid.frames = static_cast<int>(1 + (len - window) / hop);
  grid.values.assign(static_cast<std::size_t>(grid.bins) * grid.frames, 0.0);

  const std::vector<double> win = make_window(config.window_function, window);
  std::vector<double> frame(static_cast<std::size_t>(window));
  std::vector<double> mags(static_cast<std::size_t>(grid.bins));
  for (int f = 0; f < grid.frames; ++f) {
    const std::int64_t start = static_cast<std::int64_t>(f) * hop;
    for (int i = 0; i < window; ++i) {
      frame[static_cast<std::size_t>(i)] =
          clip.samples[static_cast<std::size_t>(start + i)] * win[static_cast<std::size_t>(i)];
    }
    frame_magnitudes(frame, mags.data(), grid.bins);
    for (int k = 0; k < grid.bins; ++k) {
      grid.values[static_cast<std::size_t>(k) * grid.frames + f] = mags[static_cast<std::size_t>(k)];
    }
  }
  return grid;
}

}  // namespace phonation
