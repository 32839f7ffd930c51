#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phonation/mel.hpp"
#include "phonation/model.hpp"

namespace phonation {

// Gradient-weighted class activation map at one conv layer's resolution.
// Values are non-negative with max exactly 1 unless the map is identically 0.
struct ActivationMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::string layer;
  int target_class = -1;
  std::string source_id;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Core computation on an already-built graph: backward from the raw target
// logit, per-channel weights = spatial mean of d(logit)/d(activation), map =
// ReLU(sum_k alpha_k * A_k), then max-normalized.
ActivationMap grad_cam_from_graph(Tape& tape, const Tensor& activation, const Tensor& logits,
                                  int target_class);

// Runs the network on one segment [1,1,bands,frames] and taps `layer`.
ActivationMap grad_cam(const PhonationNet& net, const Tensor& segment, int target_class,
                       ConvTap layer);

// RGB image; rows run top-to-bottom from high to low frequency.
struct HeatmapImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major
  std::string colormap_id = "ember";
};

// Upsamples the map to the spectrogram grid (align-corners bilinear, the
// same interpolation the network uses) and blends it over the grayscale
// spectrogram.
HeatmapImage overlay_and_upsample(const ActivationMap& map, const MelSpectrogram& spec);

// `.pgm` writes binary P5 grayscale (luma), `.ppm` binary P6 color.
void export_image(const HeatmapImage& image, const std::string& path);

std::vector<std::uint8_t> encode_pgm(const HeatmapImage& image);
std::vector<std::uint8_t> encode_ppm(const HeatmapImage& image);

}  // namespace phonation
