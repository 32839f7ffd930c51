#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "phonation/audio.hpp"
#include "phonation/dataset.hpp"

namespace phonation {

// Spectral recipe for one phonation mode: a harmonic series with a dB/octave
// tilt, high-passed turbulence noise at a given energy ratio, and optional
// amplitude modulation.
struct ModeTimbre {
  int harmonics = 20;
  double noise_ratio = 0.1;        // noise-to-harmonic energy ratio
  double tilt_db_per_octave = -9.0;
  double am_depth = 0.0;
  double am_rate_hz = 5.0;
};

struct SynthConfig {
  std::array<ModeTimbre, kNumModes> modes = {
      // breathy: weak upper harmonics buried in turbulence
      ModeTimbre{10, 1.0, -15.0, 0.04, 4.0},
      // neutral: balanced spectrum, little noise or modulation
      ModeTimbre{20, 0.12, -9.5, 0.05, 4.5},
      // flow: rich series with pronounced regular modulation
      ModeTimbre{26, 0.05, -5.5, 0.40, 5.5},
      // pressed: few strong harmonics, energy packed into the mid bands
      ModeTimbre{10, 0.02, -2.0, 0.08, 6.5},
  };
  double f0_min_hz = 200.0;
  double f0_max_hz = 600.0;
  double duration_min_s = 1.5;
  double duration_max_s = 3.0;
  int sample_rate = 44100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthClip {
  AudioClip audio;
  LabeledClip label;
};

// Deterministic four-class dataset generator; clip i gets mode i % 4 and its
// own rng stream derived from (seed, i).
std::vector<SynthClip> synthesize_dataset(const SynthConfig& config, int n_clips);

SynthClip synthesize_clip(const SynthConfig& config, int clip_index);

}  // namespace phonation
