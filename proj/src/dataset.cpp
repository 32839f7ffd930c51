#include "phonation/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "phonation/errors.hpp"

namespace phonation {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

PhonationMode parse_mode(const std::string& name) {
  const std::string m = lower(strip(name));
  if (m == "breathy") return PhonationMode::Breathy;
  if (m == "neutral") return PhonationMode::Neutral;
  if (m == "flow") return PhonationMode::Flow;
  if (m == "pressed") return PhonationMode::Pressed;
  throw ManifestError("unknown phonation mode '" + name + "'");
}

const char* mode_name(PhonationMode mode) {
  switch (mode) {
    case PhonationMode::Breathy: return "breathy";
    case PhonationMode::Neutral: return "neutral";
    case PhonationMode::Flow: return "flow";
    case PhonationMode::Pressed: return "pressed";
  }
  throw ValueError("invalid phonation mode value");
}

std::vector<LabeledClip> parse_manifest(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ManifestError(origin + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (strip(line) != "path,mode,pitch,vowel") {
    throw ManifestError(origin + ": header must be 'path,mode,pitch,vowel'");
  }

  std::vector<LabeledClip> clips;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ManifestError(origin + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    LabeledClip clip;
    clip.path = strip(fields[0]);
    if (clip.path.empty()) {
      throw ManifestError(origin + ":" + std::to_string(line_no) + ": missing file path");
    }
    if (!seen.insert(clip.path).second) {
      throw ManifestError(origin + ":" + std::to_string(line_no) + ": duplicate path '" +
                          clip.path + "'");
    }
    clip.mode = parse_mode(fields[1]);
    clip.pitch = strip(fields[2]);
    clip.vowel = strip(fields[3]);
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<LabeledClip> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path);
}

void write_manifest(const std::string& path, const std::vector<LabeledClip>& clips) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path);
  out << "path,mode,pitch,vowel\n";
  for (const auto& c : clips) {
    out << c.path << ',' << mode_name(c.mode) << ',' << c.pitch << ',' << c.vowel << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

int SegmentationConfig::window_frames(double hop_seconds) const {
  return static_cast<int>(std::lround(window_ms / 1000.0 / hop_seconds));
}

int SegmentationConfig::stride_frames(double hop_seconds) const {
  return window_frames(hop_seconds) -
         static_cast<int>(std::lround(overlap_ms / 1000.0 / hop_seconds));
}

int SegmentationConfig::trim_frames(double hop_seconds) const {
  return static_cast<int>(std::ceil(trim_ms / 1000.0 / hop_seconds));
}

namespace {

Segment cut_window(const MelSpectrogram& spec, PhonationMode mode, int offset, int frames) {
  Segment seg;
  seg.n_bands = spec.n_bands;
  seg.frames = frames;
  seg.mode = mode;
  seg.clip_id = spec.source_id;
  seg.frame_offset = offset;
  seg.values.resize(static_cast<std::size_t>(spec.n_bands) * frames);
  for (int b = 0; b < spec.n_bands; ++b) {
    for (int f = 0; f < frames; ++f) {
      seg.values[static_cast<std::size_t>(b) * frames + f] = spec.at(b, offset + f);
    }
  }
  return seg;
}

}  // namespace

SegmentationResult segment_for_training(const MelSpectrogram& spec, PhonationMode mode,
                                        const SegmentationConfig& config) {
  if (spec.frame_hop_seconds <= 0.0) throw ConfigError("segmentation: unknown frame hop");
  const int F = config.window_frames(spec.frame_hop_seconds);
  const int stride = config.stride_frames(spec.frame_hop_seconds);
  const int trim = config.trim_frames(spec.frame_hop_seconds);
  if (F < 1 || stride < 1) throw ConfigError("segmentation: degenerate window or stride");

  SegmentationResult result;
  const int usable = spec.frames - 2 * trim;
  if (usable < F) {
    result.skipped = 1;
    return result;
  }
  for (int offset = trim; offset + F <= trim + usable; offset += stride) {
    result.segments.push_back(cut_window(spec, mode, offset, F));
  }
  return result;
}

Segment segment_for_test(const MelSpectrogram& spec, PhonationMode mode,
                         const SegmentationConfig& config) {
  if (spec.frame_hop_seconds <= 0.0) throw ConfigError("segmentation: unknown frame hop");
  const int F = config.window_frames(spec.frame_hop_seconds);
  if (spec.frames < F) {
    throw TooShortError("segment_for_test: " + std::to_string(spec.frames) +
                        " frames, need " + std::to_string(F));
  }
  return cut_window(spec, mode, (spec.frames - F) / 2, F);
}

FoldSplit make_folds(const std::vector<LabeledClip>& clips, int n_folds, std::uint64_t seed) {
  if (n_folds < 1) throw ConfigError("make_folds: need at least one fold");
  if (static_cast<int>(clips.size()) < n_folds) {
    throw ConfigError("make_folds: fewer clips than folds");
  }

  std::vector<std::size_t> order(clips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Explicit Fisher-Yates keeps the assignment identical across toolchains.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }

  FoldSplit split;
  split.n_folds = n_folds;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    split.fold_of[clips[order[i]].path] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  }
  return split;
}

}  // namespace phonation
