#include "phonation/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "phonation/errors.hpp"
#include "phonation/ops.hpp"

namespace phonation {

namespace {

struct Rgb {
  double r, g, b;
};

// Dark-to-bright perceptual ramp, interpolated between five stops.
Rgb colormap_ember(double v) {
  static const Rgb stops[5] = {{13, 8, 65}, {84, 15, 109}, {187, 55, 84},
                               {249, 140, 10}, {252, 255, 164}};
  v = std::clamp(v, 0.0, 1.0);
  const double pos = v * 4.0;
  const int i = std::min(3, static_cast<int>(pos));
  const double t = pos - i;
  return {stops[i].r + t * (stops[i + 1].r - stops[i].r),
          stops[i].g + t * (stops[i + 1].g - stops[i].g),
          stops[i].b + t * (stops[i + 1].b - stops[i].b)};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

std::vector<std::uint8_t> encode_pnm(const HeatmapImage& image, bool color) {
  if (image.width < 1 || image.height < 1 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw ValueError("image is empty or inconsistent");
  }
  std::string header = std::string(color ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                       " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  if (color) {
    out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  } else {
    out.reserve(out.size() + static_cast<std::size_t>(image.width) * image.height);
    for (std::size_t i = 0; i < image.rgb.size(); i += 3) {
      const long luma = (299L * image.rgb[i] + 587L * image.rgb[i + 1] +
                         114L * image.rgb[i + 2] + 500L) / 1000L;
      out.push_back(static_cast<std::uint8_t>(luma));
    }
  }
  return out;
}

}  // namespace

ActivationMap grad_cam_from_graph(Tape& tape, const Tensor& activation, const Tensor& logits,
                                  int target_class) {
  if (!activation.defined() || activation.ndim() != 4 || activation.dim(0) != 1) {
    throw ShapeError("grad_cam: activation must be [1,K,h,w]");
  }
  if (!logits.defined() || logits.ndim() != 2 || logits.dim(0) != 1) {
    throw ShapeError("grad_cam: logits must be [1,C]");
  }
  if (target_class < 0 || target_class >= logits.dim(1)) {
    throw ValueError("grad_cam: target class out of range");
  }

  Tensor target = pick(tape, logits, 0, target_class);
  tape.backward(target);

  const int channels = activation.dim(1);
  const int h = activation.dim(2);
  const int w = activation.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto& values = activation.data();
  const auto& grads = activation.grad();

  ActivationMap map;
  map.rows = h;
  map.cols = w;
  map.target_class = target_class;
  map.values.assign(plane, 0.0);
  for (int k = 0; k < channels; ++k) {
    const double* a = values.data() + static_cast<std::size_t>(k) * plane;
    const double* g = grads.data() + static_cast<std::size_t>(k) * plane;
    double alpha = 0.0;
    for (std::size_t i = 0; i < plane; ++i) alpha += g[i];
    alpha /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) map.values[i] += alpha * a[i];
  }
  double peak = 0.0;
  for (auto& v : map.values) {
    v = std::max(v, 0.0);
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (auto& v : map.values) v /= peak;
  }
  return map;
}

ActivationMap grad_cam(const PhonationNet& net, const Tensor& segment, int target_class,
                       ConvTap layer) {
  if (!segment.defined() || segment.ndim() != 4 || segment.dim(0) != 1) {
    throw ShapeError("grad_cam: segment must be [1,1,bands,frames]");
  }
  Tape tape;
  const ForwardTrace trace = net.forward_trace(tape, segment);
  ActivationMap map = grad_cam_from_graph(tape, trace.taps[static_cast<std::size_t>(layer)],
                                          trace.logits, target_class);
  map.layer = conv_tap_name(layer);
  return map;
}

HeatmapImage overlay_and_upsample(const ActivationMap& map, const MelSpectrogram& spec) {
  if (map.rows < 1 || map.cols < 1) throw ValueError("overlay: empty activation map");
  if (map.rows > spec.n_bands || map.cols > spec.frames) {
    throw ShapeError("overlay: map " + std::to_string(map.rows) + "x" +
                     std::to_string(map.cols) + " does not come from a spectrogram of " +
                     std::to_string(spec.n_bands) + "x" + std::to_string(spec.frames));
  }

  // Reuse the network's own interpolation for the upsampling step.
  Tape tape;
  Tensor m = Tensor::from_data({1, 1, map.rows, map.cols}, map.values);
  const Tensor up = upsample_bilinear(tape, m, spec.n_bands, spec.frames);
  const auto& heat = up.data();

  double spec_peak = 0.0;
  for (double v : spec.values) spec_peak = std::max(spec_peak, v);

  HeatmapImage img;
  img.width = spec.frames;
  img.height = spec.n_bands;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int row = 0; row < img.height; ++row) {
    const int band = img.height - 1 - row;  // high frequencies at the top
    for (int col = 0; col < img.width; ++col) {
      const double under = (spec_peak > 0.0) ? spec.at(band, col) / spec_peak : 0.0;
      const double h = heat[static_cast<std::size_t>(band) * img.width + col];
      const Rgb tint = colormap_ember(h);
      const double alpha = 0.65 * h;  // map intensity modulates the hue
      const double gray = 255.0 * under;
      const std::size_t px = (static_cast<std::size_t>(row) * img.width + col) * 3;
      img.rgb[px + 0] = to_byte((1.0 - alpha) * gray + alpha * tint.r);
      img.rgb[px + 1] = to_byte((1.0 - alpha) * gray + alpha * tint.g);
      img.rgb[px + 2] = to_byte((1.0 - alpha) * gray + alpha * tint.b);
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const HeatmapImage& image) { return encode_pnm(image, false); }

std::vector<std::uint8_t> encode_ppm(const HeatmapImage& image) { return encode_pnm(image, true); }

void export_image(const HeatmapImage& image, const std::string& path) {
  std::vector<std::uint8_t> bytes;
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0) {
    bytes = encode_ppm(image);
  } else if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0) {
    bytes = encode_pgm(image);
  } else {
    throw IoError("export_image: unsupported extension on " + path);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace phonation
