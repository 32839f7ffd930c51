#include "phonation/synth.hpp"

#include <cmath>
#include <complex>
#include <random>

#include "phonation/errors.hpp"

namespace phonation {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller; self-contained so the stream is identical on every toolchain.
double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string note_name(double f0) {
  static const char* names[12] = {"C", "C#", "D", "D#", "E", "F",
                                  "F#", "G", "G#", "A", "A#", "B"};
  const int midi = static_cast<int>(std::lround(69.0 + 12.0 * std::log2(f0 / 440.0)));
  const int octave = midi / 12 - 1;
  return std::string(names[((midi % 12) + 12) % 12]) + std::to_string(octave);
}

constexpr double kNoiseHighpassHz = 2000.0;  // turbulence sits above the low harmonics
constexpr double kPeakTarget = 0.7;

}  // namespace

void SynthConfig::validate() const {
  if (!(f0_min_hz > 0.0 && f0_min_hz < f0_max_hz)) {
    throw ConfigError("synth: fundamental range is degenerate");
  }
  if (!(duration_min_s > 0.0 && duration_min_s < duration_max_s)) {
    throw ConfigError("synth: duration range is degenerate");
  }
  if (sample_rate <= 0) throw ConfigError("synth: sample rate must be positive");
  for (int a = 0; a < kNumModes; ++a) {
    if (modes[a].harmonics < 1) throw ConfigError("synth: harmonic count must be >= 1");
    if (modes[a].noise_ratio < 0.0) throw ConfigError("synth: noise ratio must be >= 0");
    for (int b = a + 1; b < kNumModes; ++b) {
      const auto& x = modes[a];
      const auto& y = modes[b];
      if (x.harmonics == y.harmonics && x.noise_ratio == y.noise_ratio &&
          x.tilt_db_per_octave == y.tilt_db_per_octave && x.am_depth == y.am_depth &&
          x.am_rate_hz == y.am_rate_hz) {
        throw ConfigError("synth: mode timbres must be pairwise distinct");
      }
    }
  }
}

SynthClip synthesize_clip(const SynthConfig& config, int clip_index) {
  config.validate();
  std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(clip_index)));
  const auto mode = static_cast<PhonationMode>(clip_index % kNumModes);
  const ModeTimbre& base = config.modes[static_cast<std::size_t>(clip_index % kNumModes)];

  // Per-clip jitter keeps class parameter distributions overlapping.
  ModeTimbre timbre = base;
  timbre.noise_ratio *= uniform(rng, 0.8, 1.25);
  timbre.tilt_db_per_octave += uniform(rng, -0.75, 0.75);
  timbre.am_depth *= uniform(rng, 0.85, 1.15);
  timbre.am_rate_hz *= uniform(rng, 0.9, 1.1);

  const double f0 = uniform(rng, config.f0_min_hz, config.f0_max_hz);
  const double duration = uniform(rng, config.duration_min_s, config.duration_max_s);
  const int sr = config.sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::lround(duration * sr));

  // Harmonic series via complex phasor recurrence (no per-sample sin calls).
  std::vector<double> harm(n, 0.0);
  std::vector<std::complex<double>> phasor, step;
  std::vector<double> amp;
  for (int h = 1; h <= timbre.harmonics; ++h) {
    const double fh = f0 * h;
    if (fh >= 0.45 * sr) break;
    const double phase = uniform(rng, 0.0, 2.0 * M_PI);
    phasor.emplace_back(std::cos(phase), std::sin(phase));
    const double w = 2.0 * M_PI * fh / sr;
    step.emplace_back(std::cos(w), std::sin(w));
    amp.push_back(std::pow(10.0, timbre.tilt_db_per_octave * std::log2(double(h)) / 20.0));
  }
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t h = 0; h < phasor.size(); ++h) {
      s += amp[h] * phasor[h].imag();
      phasor[h] *= step[h];
    }
    harm[t] = s;
    if ((t & 0xfffu) == 0xfffu) {
      for (auto& z : phasor) z /= std::abs(z);  // keep the recurrence on the unit circle
    }
  }

  // High-passed turbulence noise scaled to the requested energy ratio.
  std::vector<double> noise(n, 0.0);
  const double rc = 1.0 / (2.0 * M_PI * kNoiseHighpassHz);
  const double alpha = rc / (rc + 1.0 / sr);
  double prev_in = 0.0, prev_out = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double white = gaussian(rng);
    prev_out = alpha * (prev_out + white - prev_in);
    prev_in = white;
    noise[t] = prev_out;
  }
  const double harm_rms = rms(harm);
  const double noise_rms = rms(noise);
  const double noise_gain =
      (noise_rms > 0.0) ? std::sqrt(timbre.noise_ratio) * harm_rms / noise_rms : 0.0;

  std::vector<double> samples(n);
  const double am_norm = 1.0 + timbre.am_depth;
  for (std::size_t t = 0; t < n; ++t) {
    const double am =
        (1.0 + timbre.am_depth * std::sin(2.0 * M_PI * timbre.am_rate_hz * t / sr)) / am_norm;
    samples[t] = (harm[t] + noise_gain * noise[t]) * am;
  }

  // 20 ms raised-cosine ramps avoid clicks at the clip boundaries.
  const std::size_t ramp = std::min(n / 2, static_cast<std::size_t>(sr / 50));
  for (std::size_t t = 0; t < ramp; ++t) {
    const double g = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(t) / ramp);
    samples[t] *= g;
    samples[n - 1 - t] *= g;
  }

  double peak = 0.0;
  for (double v : samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double gain = kPeakTarget / peak;
    for (auto& v : samples) v *= gain;
  }

  SynthClip clip;
  clip.audio.sample_rate = sr;
  clip.audio.samples = std::move(samples);
  clip.label.mode = mode;
  clip.label.pitch = note_name(f0);
  static const char* vowels[5] = {"a", "e", "i", "o", "u"};
  clip.label.vowel = vowels[rng() % 5];

  char name[64];
  std::snprintf(name, sizeof name, "clip_%05d_%s.wav", clip_index, mode_name(mode));
  clip.label.path = name;
  return clip;
}

std::vector<SynthClip> synthesize_dataset(const SynthConfig& config, int n_clips) {
  if (n_clips < 1) throw ValueError("synthesize_dataset: clip count must be >= 1");
  std::vector<SynthClip> clips;
  clips.reserve(static_cast<std::size_t>(n_clips));
  for (int i = 0; i < n_clips; ++i) clips.push_back(synthesize_clip(config, i));
  return clips;
}

}  // namespace phonation
