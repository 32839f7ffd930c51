#include "phonation/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "phonation/errors.hpp"

namespace phonation {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

double kaiser_window(double u, double beta) {
  // u in [-1, 1]; zero outside.
  const double t = 1.0 - u * u;
  if (t <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(t)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw MalformedWavError("not a RIFF/WAVE container");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(hdr + 4);
    if (pos + 8 + chunk_size > bytes.size()) {
      throw MalformedWavError("chunk overruns file (truncated data)");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw MalformedWavError("fmt chunk too small");
      const std::uint8_t* f = hdr + 8;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = hdr + 8;
      data_size = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw MalformedWavError("missing fmt or data chunk");
  if (sample_rate == 0) throw MalformedWavError("zero sample rate");
  if (channels != 1 && channels != 2) {
    throw UnsupportedWavError("only mono and stereo are supported");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedWavError("only PCM 16-bit and IEEE float 32-bit are supported");
  }
  if (data_size == 0) throw EmptyWavError("data chunk holds no samples");

  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t frame_bytes = bytes_per_sample * channels;
  if (data_size % frame_bytes != 0) throw MalformedWavError("data chunk is not frame-aligned");
  const std::size_t frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        const std::int16_t raw = static_cast<std::int16_t>(read_u16(p));
        acc += raw / 32768.0;
      } else {
        float v;
        std::uint32_t bits32 = read_u32(p);
        std::memcpy(&v, &bits32, sizeof v);
        acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
      }
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  if (clip.samples.empty()) throw EmptyWavError("cannot encode an empty clip");
  if (clip.sample_rate <= 0) throw ValueError("cannot encode without a sample rate");
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  append_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  append_u32(out, 16);
  append_u16(out, kFormatPcm);
  append_u16(out, 1);
  append_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  append_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  append_u16(out, 2);
  append_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  append_u32(out, data_size);
  for (double s : clip.samples) {
    const double scaled = std::clamp(s, -1.0, 1.0) * 32768.0;
    const long q = std::lround(scaled);
    append_u16(out, static_cast<std::uint16_t>(
                        static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
  }
  return out;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  const auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ValueError("resample: target rate must be positive");
  if (clip.samples.empty() || clip.sample_rate <= 0) {
    throw ValueError("resample: invalid input clip");
  }
  if (clip.sample_rate == target_rate) return clip;

  constexpr double kBeta = 8.6;
  constexpr int kHalfTaps = 16;  // 32-tap kernel

  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / clip.sample_rate);
  const double half_width = kHalfTaps / cutoff;
  const std::int64_t in_len = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t out_len =
      (in_len * target_rate + clip.sample_rate / 2) / clip.sample_rate;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(std::max<std::int64_t>(out_len, 1)));
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.samples.size()); ++i) {
    const double center = i * step;
    const std::int64_t k0 =
        std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(center - half_width)));
    const std::int64_t k1 = std::min<std::int64_t>(
        in_len - 1, static_cast<std::int64_t>(std::floor(center + half_width)));
    double acc = 0.0, wsum = 0.0;
    for (std::int64_t k = k0; k <= k1; ++k) {
      const double d = k - center;
      const double tap = cutoff * sinc(cutoff * d) * kaiser_window(d / half_width, kBeta);
      acc += clip.samples[static_cast<std::size_t>(k)] * tap;
      wsum += tap;
    }
    out.samples[static_cast<std::size_t>(i)] =
        (wsum != 0.0) ? std::clamp(acc / wsum, -1.0, 1.0) : 0.0;
  }
  return out;
}

AudioClip trim_silence(const AudioClip& clip, double threshold_db) {
  if (threshold_db >= 0.0) throw ValueError("trim_silence: threshold must be negative dB");
  if (clip.samples.empty() || clip.sample_rate <= 0) {
    throw ValueError("trim_silence: invalid input clip");
  }
  const std::size_t len = clip.samples.size();
  const std::size_t frame = std::max<std::size_t>(1, (clip.sample_rate * 20 + 500) / 1000);
  const std::size_t hop = std::max<std::size_t>(1, (clip.sample_rate * 10 + 500) / 1000);

  std::vector<double> rms;
  std::vector<std::size_t> starts;
  for (std::size_t start = 0; start < len; start += hop) {
    const std::size_t end = std::min(len, start + frame);
    double acc = 0.0;
    for (std::size_t i = start; i < end; ++i) acc += clip.samples[i] * clip.samples[i];
    rms.push_back(std::sqrt(acc / static_cast<double>(end - start)));
    starts.push_back(start);
    if (end == len) break;
  }

  const double peak = *std::max_element(rms.begin(), rms.end());
  if (peak <= 0.0) throw AllSilentError("every frame is silent");
  const double gate = peak * std::pow(10.0, threshold_db / 20.0);

  std::size_t first = 0;
  while (first < rms.size() && rms[first] < gate) ++first;
  std::size_t last = rms.size() - 1;
  while (last > first && rms[last] < gate) --last;
  if (first >= rms.size()) throw AllSilentError("every frame is below the gate");

  const std::size_t begin = starts[first];
  const std::size_t end = std::min(len, starts[last] + frame);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace phonation
