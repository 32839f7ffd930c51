#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phonation/mel.hpp"

namespace phonation {

// The four phonation modes with their stable integer encoding.
enum class PhonationMode : int { Breathy = 0, Neutral = 1, Flow = 2, Pressed = 3 };

constexpr int kNumModes = 4;

PhonationMode parse_mode(const std::string& name);  // case-insensitive
const char* mode_name(PhonationMode mode);

struct LabeledClip {
  std::string path;   // file path or synthetic id
  PhonationMode mode = PhonationMode::Breathy;
  std::string pitch;  // optional note string
  std::string vowel;  // optional
};

// Reads a CSV manifest with header `path,mode,pitch,vowel`.
std::vector<LabeledClip> load_manifest(const std::string& path);
std::vector<LabeledClip> parse_manifest(const std::string& text, const std::string& origin);
void write_manifest(const std::string& path, const std::vector<LabeledClip>& clips);

// One fixed-length spectrogram window used as a training/test sample.
struct Segment {
  int n_bands = 0;
  int frames = 0;
  std::vector<double> values;  // row-major [band][frame]
  PhonationMode mode = PhonationMode::Breathy;
  std::string clip_id;
  int frame_offset = 0;
};

// Millisecond windowing parameters; frame counts derive from the hop.
struct SegmentationConfig {
  double window_ms = 500.0;
  double overlap_ms = 128.0;
  double trim_ms = 128.0;

  int window_frames(double hop_seconds) const;  // round(window_ms / hop)
  int stride_frames(double hop_seconds) const;  // window - round(overlap_ms / hop)
  int trim_frames(double hop_seconds) const;    // ceil(trim_ms / hop)
};

struct SegmentationResult {
  std::vector<Segment> segments;
  int skipped = 0;  // 1 when the spectrogram was too short for any window
};

// Drops the unstable head/tail, then slides the training window. A clip too
// short for one window yields zero segments and a skip flag, not an error.
SegmentationResult segment_for_training(const MelSpectrogram& spec, PhonationMode mode,
                                        const SegmentationConfig& config = {});

// Single window centered on the spectrogram; too-short clips are an error.
Segment segment_for_test(const MelSpectrogram& spec, PhonationMode mode,
                         const SegmentationConfig& config = {});

// Deterministic per-clip fold assignment. Keeping whole clips inside a fold
// prevents augmented windows of one recording from leaking across folds.
struct FoldSplit {
  std::map<std::string, int> fold_of;
  int n_folds = 0;
  std::uint64_t seed = 0;
};

FoldSplit make_folds(const std::vector<LabeledClip>& clips, int n_folds = 10,
                     std::uint64_t seed = 0);

}  // namespace phonation
