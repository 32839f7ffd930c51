#include "phonation/segment_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "phonation/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "segment payloads are written as raw little-endian doubles");

namespace phonation {

namespace {

constexpr char kMagic[8] = {'P', 'H', 'O', 'N', 'S', 'E', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CorruptFileError("segments: truncated file");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CorruptFileError("segments: truncated file");
  return v;
}

}  // namespace

void save_segments(const std::string& path, const std::vector<Segment>& segments) {
  if (segments.empty()) throw ValueError("save_segments: nothing to save");
  const int bands = segments.front().n_bands;
  const int frames = segments.front().frames;
  for (const auto& s : segments) {
    if (s.n_bands != bands || s.frames != frames) {
      throw ShapeError("save_segments: segments must share one shape");
    }
  }

  std::vector<std::string> clip_ids;
  std::map<std::string, std::uint32_t> clip_index;
  for (const auto& s : segments) {
    if (clip_index.emplace(s.clip_id, static_cast<std::uint32_t>(clip_ids.size())).second) {
      clip_ids.push_back(s.clip_id);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(bands));
  write_u32(out, static_cast<std::uint32_t>(frames));
  write_u64(out, segments.size());
  for (const auto& s : segments) {
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  }
  for (const auto& s : segments) {
    const auto label = static_cast<std::uint8_t>(s.mode);
    out.write(reinterpret_cast<const char*>(&label), 1);
  }
  for (const auto& s : segments) write_u32(out, clip_index.at(s.clip_id));
  for (const auto& s : segments) write_u32(out, static_cast<std::uint32_t>(s.frame_offset));
  write_u32(out, static_cast<std::uint32_t>(clip_ids.size()));
  for (const auto& id : clip_ids) {
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<Segment> load_segments(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CorruptFileError("segments: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw VersionMismatchError("segments: version " + std::to_string(version));
  }
  const int bands = static_cast<int>(read_u32(in));
  const int frames = static_cast<int>(read_u32(in));
  const std::uint64_t count = read_u64(in);
  if (bands < 1 || frames < 1 || count < 1) throw CorruptFileError("segments: bad header");

  std::vector<Segment> segments(count);
  const std::size_t plane = static_cast<std::size_t>(bands) * static_cast<std::size_t>(frames);
  for (auto& s : segments) {
    s.n_bands = bands;
    s.frames = frames;
    s.values.resize(plane);
    in.read(reinterpret_cast<char*>(s.values.data()),
            static_cast<std::streamsize>(plane * sizeof(double)));
    if (!in) throw CorruptFileError("segments: truncated values");
  }
  for (auto& s : segments) {
    std::uint8_t label = 0;
    in.read(reinterpret_cast<char*>(&label), 1);
    if (!in) throw CorruptFileError("segments: truncated labels");
    if (label >= kNumModes) throw CorruptFileError("segments: label out of range");
    s.mode = static_cast<PhonationMode>(label);
  }
  std::vector<std::uint32_t> clip_idx(count);
  for (auto& idx : clip_idx) idx = read_u32(in);
  for (auto& s : segments) s.frame_offset = static_cast<int>(read_u32(in));
  const std::uint32_t n_clips = read_u32(in);
  std::vector<std::string> clip_ids(n_clips);
  for (auto& id : clip_ids) {
    const std::uint32_t len = read_u32(in);
    id.resize(len);
    in.read(id.data(), len);
    if (!in) throw CorruptFileError("segments: truncated clip table");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    if (clip_idx[i] >= n_clips) throw CorruptFileError("segments: clip index out of range");
    segments[i].clip_id = clip_ids[clip_idx[i]];
  }
  return segments;
}

std::vector<TrainingClip> group_by_clip(const std::vector<Segment>& segments) {
  std::vector<TrainingClip> clips;
  std::map<std::string, std::size_t> index;
  for (const auto& seg : segments) {
    auto [it, inserted] = index.emplace(seg.clip_id, clips.size());
    if (inserted) {
      clips.push_back(TrainingClip{seg.clip_id, seg.mode, {}});
    }
    clips[it->second].segments.push_back(seg);
  }
  return clips;
}

}  // namespace phonation
