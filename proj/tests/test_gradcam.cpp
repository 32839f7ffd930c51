#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "phonation/errors.hpp"
#include "phonation/gradcam.hpp"
#include "phonation/model.hpp"
#include "phonation/ops.hpp"
#include "test_util.hpp"

using namespace phonation;
namespace fs = std::filesystem;

namespace {

// Toy 1-conv graph: a 3x1 column kernel [0,1,0] responds exactly at the band
// where the input carries energy; two dense heads weight the feature map with
// opposite signs.
struct ToyGraph {
  Tensor input, conv_w, conv_b, head_w, head_b;
  Tensor activation, logits;
};

ToyGraph build_toy(Tape& tape, int hot_band, double head0_sign = 1.0) {
  const int bands = 16, frames = 8;
  ToyGraph g;
  g.input = Tensor::zeros({1, 1, bands, frames});
  for (int f = 0; f < frames; ++f) {
    g.input.data()[static_cast<std::size_t>(hot_band * frames + f)] = 1.0;
  }
  g.conv_w = Tensor::from_data({1, 1, 3, 1}, {0.0, 1.0, 0.0}, true);
  g.conv_b = Tensor::zeros({1}, true);
  g.activation = relu(tape, conv2d(tape, g.input, g.conv_w, g.conv_b, 1, 0));

  g.head_w = Tensor::zeros({bands * frames, 2}, true);
  for (int i = 0; i < bands * frames; ++i) {
    g.head_w.data()[static_cast<std::size_t>(i) * 2] = head0_sign * 0.1;
    g.head_w.data()[static_cast<std::size_t>(i) * 2 + 1] = -head0_sign * 0.1;
  }
  g.head_b = Tensor::zeros({2}, true);
  Tensor flat = reshape(tape, g.activation, {1, bands * frames});
  g.logits = dense(tape, flat, g.head_w, g.head_b);
  return g;
}

double map_mass_in_rows(const ActivationMap& map, int row_lo, int row_hi) {
  double in = 0.0, total = 0.0;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      total += map.at(r, c);
      if (r >= row_lo && r <= row_hi) in += map.at(r, c);
    }
  }
  return (total > 0.0) ? in / total : 0.0;
}

}  // namespace

TEST_CASE("toy single-band network concentrates the map on the hot band") {
  Tape tape;
  ToyGraph g = build_toy(tape, /*hot_band=*/5);
  const ActivationMap map = grad_cam_from_graph(tape, g.activation, g.logits, 0);
  CHECK(map.rows == 16);
  CHECK(map.cols == 8);
  CHECK(map_mass_in_rows(map, 5, 5) >= 0.8);

  // normalization contract
  double peak = 0.0;
  for (double v : map.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    peak = std::max(peak, v);
  }
  CHECK(peak == 1.0);
}

TEST_CASE("negative-class map is zero after the ReLU") {
  Tape tape;
  ToyGraph g = build_toy(tape, 5);
  // class 1 weights are negative on the active band: alpha < 0 everywhere
  const ActivationMap map = grad_cam_from_graph(tape, g.activation, g.logits, 1);
  for (double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("zero activations produce an identically zero map") {
  Tape tape;
  const int bands = 8, frames = 4;
  Tensor input = Tensor::zeros({1, 1, bands, frames});
  Tensor w = Tensor::from_data({1, 1, 3, 1}, {0.2, 0.5, 0.1}, true);
  Tensor b = Tensor::zeros({1}, true);
  Tensor act = relu(tape, conv2d(tape, input, w, b, 1, 0));
  Tensor head_w = Tensor::full({bands * frames, 2}, 0.3, true);
  Tensor head_b = Tensor::zeros({2}, true);
  Tensor logits = dense(tape, reshape(tape, act, {1, bands * frames}), head_w, head_b);
  const ActivationMap map = grad_cam_from_graph(tape, act, logits, 0);
  for (double v : map.values) CHECK(v == 0.0);  // normalization skipped
}

TEST_CASE("swapping the target class permutes symmetric maps") {
  // Two input channels carry mirrored band patterns; two 1x1 kernels keep
  // them apart, and the heads weight the channels with opposite signs. The
  // whole construction is symmetric under (class swap, band mirror).
  const int bands = 16, frames = 8;
  Tensor input = Tensor::zeros({1, 2, bands, frames});
  for (int f = 0; f < frames; ++f) {
    input.data()[static_cast<std::size_t>((0 * bands + 4) * frames + f)] = 1.0;
    input.data()[static_cast<std::size_t>((1 * bands + 11) * frames + f)] = 1.0;
  }
  Tensor w = Tensor::from_data({2, 2, 1, 1}, {1.0, 0.0, 0.0, 1.0}, true);
  Tensor b = Tensor::zeros({2}, true);
  Tensor head_w = Tensor::zeros({2 * bands * frames, 2}, true);
  for (int i = 0; i < bands * frames; ++i) {
    head_w.data()[static_cast<std::size_t>(i) * 2] = 0.2;                        // class 0 <- ch 0
    head_w.data()[static_cast<std::size_t>(i) * 2 + 1] = -0.2;
    head_w.data()[static_cast<std::size_t>(bands * frames + i) * 2] = -0.2;      // class 1 <- ch 1
    head_w.data()[static_cast<std::size_t>(bands * frames + i) * 2 + 1] = 0.2;
  }
  Tensor head_b = Tensor::zeros({2}, true);

  auto run = [&](int target) {
    Tape t;
    Tensor a = relu(t, conv2d(t, input, w, b, 0, 0));
    Tensor lg = dense(t, reshape(t, a, {1, 2 * bands * frames}), head_w, head_b);
    return grad_cam_from_graph(t, a, lg, target);
  };
  const ActivationMap m0 = run(0);
  const ActivationMap m1 = run(1);
  CHECK(map_mass_in_rows(m0, 4, 4) == doctest::Approx(1.0));
  CHECK(map_mass_in_rows(m1, 11, 11) == doctest::Approx(1.0));
  // m1 is m0 mirrored across the band axis
  for (int r = 0; r < bands; ++r) {
    for (int c = 0; c < frames; ++c) {
      CHECK(m0.at(r, c) == doctest::Approx(m1.at(bands - 1 - r, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("grad_cam over the real network: ranges and layer resolutions") {
  NetworkConfig cfg;
  cfg.init_seed = 31;
  PhonationNet net(cfg);
  std::mt19937_64 rng(17);
  Tensor segment = testutil::random_tensor({1, 1, 128, 12}, rng, false, 0.0, 2.0);

  int prev_rows = 1 << 30, prev_cols = 1 << 30;
  for (ConvTap tap : {ConvTap::Conv1, ConvTap::Conv2, ConvTap::Conv3, ConvTap::Conv4}) {
    const ActivationMap map = grad_cam(net, segment, 2, tap);
    CHECK(map.layer == conv_tap_name(tap));
    double peak = 0.0;
    for (double v : map.values) {
      CHECK(v >= 0.0);
      peak = std::max(peak, v);
    }
    if (peak > 0.0) CHECK(peak == 1.0);
    // deeper layers never gain resolution
    CHECK(map.rows <= prev_rows);
    CHECK(map.cols <= prev_cols);
    prev_rows = map.rows;
    prev_cols = map.cols;
  }

  CHECK_THROWS_AS(grad_cam(net, segment, 7, ConvTap::Conv1), ValueError);
}

TEST_CASE("overlay upsamples with the shared align-corners interpolation") {
  ActivationMap map;
  map.rows = 2;
  map.cols = 2;
  map.values = {1.0, 0.0, 0.0, 1.0};

  MelSpectrogram spec;
  spec.n_bands = 4;
  spec.frames = 4;
  spec.values.assign(16, 1.0);
  spec.frame_hop_seconds = 0.04;

  const HeatmapImage img = overlay_and_upsample(map, spec);
  CHECK(img.width == 4);
  CHECK(img.height == 4);
  CHECK(img.rgb.size() == 48);

  // the upsampled heat field itself follows the closed form; probe via the op
  Tape tape;
  Tensor m = Tensor::from_data({1, 1, 2, 2}, map.values);
  Tensor up = upsample_bilinear(tape, m, 4, 4);
  CHECK(up.data()[0] == doctest::Approx(1.0));
  CHECK(up.data()[5] == doctest::Approx(1.0 * (2.0 / 3.0) * (2.0 / 3.0) +
                                        1.0 * (1.0 / 3.0) * (1.0 / 3.0)));

  // uniform map of 1.0 tints everything identically
  ActivationMap flat;
  flat.rows = 2;
  flat.cols = 2;
  flat.values.assign(4, 1.0);
  const HeatmapImage tinted = overlay_and_upsample(flat, spec);
  for (std::size_t px = 3; px < tinted.rgb.size(); px += 3) {
    CHECK(tinted.rgb[px] == tinted.rgb[0]);
    CHECK(tinted.rgb[px + 1] == tinted.rgb[1]);
    CHECK(tinted.rgb[px + 2] == tinted.rgb[2]);
  }

  // map exceeding the spectrogram is a mismatch
  ActivationMap big;
  big.rows = 8;
  big.cols = 8;
  big.values.assign(64, 0.5);
  CHECK_THROWS_AS(overlay_and_upsample(big, spec), ShapeError);
}

TEST_CASE("high frequencies render at the top of the image") {
  ActivationMap map;
  map.rows = 4;
  map.cols = 4;
  map.values.assign(16, 0.0);

  MelSpectrogram spec;
  spec.n_bands = 4;
  spec.frames = 4;
  spec.values.assign(16, 0.0);
  // only the highest band is bright
  for (int f = 0; f < 4; ++f) spec.values[static_cast<std::size_t>(3 * 4 + f)] = 1.0;

  const HeatmapImage img = overlay_and_upsample(map, spec);
  // top row bright, bottom row dark
  CHECK(img.rgb[0] > 200);
  const std::size_t bottom = static_cast<std::size_t>(3) * 4 * 3;
  CHECK(img.rgb[bottom] < 50);
}

TEST_CASE("pgm and ppm fixtures are byte-exact") {
  HeatmapImage img;
  img.width = 2;
  img.height = 2;
  img.rgb = {255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255};

  // hand-assembled fixtures
  const std::vector<std::uint8_t> ppm_expected = {'P', '6', '\n', '2', ' ', '2', '\n',
                                                  '2', '5', '5', '\n',
                                                  255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255};
  CHECK(encode_ppm(img) == ppm_expected);  // 12-byte payload after the header

  // luma = (299 r + 587 g + 114 b + 500) / 1000
  const std::vector<std::uint8_t> pgm_expected = {'P', '5', '\n', '2', ' ', '2', '\n',
                                                  '2', '5', '5', '\n', 76, 150, 29, 255};
  CHECK(encode_pgm(img) == pgm_expected);

  HeatmapImage empty;
  CHECK_THROWS_AS(encode_pgm(empty), ValueError);

  // re-export is byte-identical
  const fs::path dir = fs::temp_directory_path() / "phonation_gradcam_test";
  fs::create_directories(dir);
  const std::string path = (dir / "img.pgm").string();
  export_image(img, path);
  std::ifstream in1(path, std::ios::binary);
  std::vector<char> first((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());
  in1.close();
  export_image(img, path);
  std::ifstream in2(path, std::ios::binary);
  std::vector<char> second((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  in2.close();
  CHECK(first == second);
  CHECK_THROWS_AS(export_image(img, (dir / "img.png").string()), IoError);
  fs::remove_all(dir);
}
