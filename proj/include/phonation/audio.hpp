#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace phonation {

// Mono audio: amplitudes in [-1, 1] at a fixed sample rate.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Decodes a RIFF/WAVE container (PCM 16-bit or IEEE float 32-bit, 1-2
// channels). Stereo is averaged to mono; PCM samples scale by 1/32768.
AudioClip decode_wav(const std::vector<std::uint8_t>& bytes);
AudioClip read_wav(const std::string& path);

// Serializes a clip as 16-bit PCM, clamping to [-1, 1].
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);
void write_wav(const std::string& path, const AudioClip& clip);

// Windowed-sinc (Kaiser, 32 taps) band-limited resampler. A clip already at
// the target rate is returned unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

// Removes leading/trailing 20 ms frames (10 ms hop) whose RMS sits below
// peak RMS + threshold_db. Interior samples are untouched.
AudioClip trim_silence(const AudioClip& clip, double threshold_db = -60.0);

}  // namespace phonation
