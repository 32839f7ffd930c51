#include "phonation/mel.hpp"

#include <Eigen/Core>
#include <cmath>

#include "phonation/errors.hpp"

namespace phonation {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_mel_filterbank(int window_size, int sample_rate, int n_bands, double f_min,
                                   double f_max) {
  if (window_size < 2 || sample_rate <= 0 || n_bands < 1) {
    throw ConfigError("mel filterbank: window, rate and band count must be positive");
  }
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("mel filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }

  MelFilterbank bank;
  bank.n_bands = n_bands;
  bank.bins = window_size / 2 + 1;
  bank.f_min = f_min;
  bank.f_max = f_max;
  bank.sample_rate = sample_rate;
  bank.window_size = window_size;
  bank.weights.assign(static_cast<std::size_t>(n_bands) * bank.bins, 0.0);

  // n_bands + 2 mel-equidistant edge points; point i+1 is band i's center.
  std::vector<double> edges_hz(static_cast<std::size_t>(n_bands) + 2);
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  for (int i = 0; i < n_bands + 2; ++i) {
    edges_hz[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_bands + 1));
  }
  bank.center_frequencies_hz.assign(edges_hz.begin() + 1, edges_hz.end() - 1);

  const double bin_hz = static_cast<double>(sample_rate) / window_size;
  for (int b = 0; b < n_bands; ++b) {
    const double left = edges_hz[static_cast<std::size_t>(b)];
    const double center = edges_hz[static_cast<std::size_t>(b) + 1];
    const double right = edges_hz[static_cast<std::size_t>(b) + 2];
    for (int k = 0; k < bank.bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f < right) {
        w = (f <= center) ? (f - left) / (center - left) : (right - f) / (right - center);
      }
      bank.weights[static_cast<std::size_t>(b) * bank.bins + k] = w;
    }
  }
  return bank;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const StftConfig& config,
                               const MelFilterbank& bank, bool log_compress,
                               const std::string& source_id) {
  if (clip.sample_rate != bank.sample_rate) {
    throw ConfigError("mel_spectrogram: clip must be resampled to the filterbank rate");
  }
  if (config.window_size != bank.window_size) {
    throw ConfigError("mel_spectrogram: filterbank was built for a different window size");
  }
  const MagnitudeGrid grid = stft_magnitude(clip, config);

  MelSpectrogram spec;
  spec.n_bands = bank.n_bands;
  spec.frames = grid.frames;
  spec.frame_hop_seconds = static_cast<double>(config.hop()) / clip.sample_rate;
  spec.source_id = source_id;
  spec.values.assign(static_cast<std::size_t>(bank.n_bands) * grid.frames, 0.0);

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> W(bank.weights.data(), bank.n_bands, bank.bins);
  Eigen::Map<const RowMat> G(grid.values.data(), grid.bins, grid.frames);
  Eigen::Map<RowMat> M(spec.values.data(), bank.n_bands, grid.frames);
  M.noalias() = W * G;

  if (log_compress) {
    for (auto& v : spec.values) v = std::log1p(v);
  }
  return spec;
}

}  // namespace phonation
