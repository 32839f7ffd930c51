#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phonation/ops.hpp"
#include "phonation/tensor.hpp"

namespace phonation {

// n-by-m convolution kernel extent with the frequency bias m < n.
struct FilterShape {
  int freq = 5;  // n
  int time = 3;  // m
};

struct ConvSpec {
  FilterShape filter;
  int out_channels = 16;
  int pad_f = 2;
  int pad_t = 1;
};

struct PoolSpec {
  int window_f = 2;
  int window_t = 2;
  int stride_f = 2;
  int stride_t = 2;
};

struct MaskBranchSpec {
  PoolSpec pool;
  FilterShape filter{5, 3};
  int channels = 32;
};

struct NetworkConfig {
  int input_bands = 128;
  int input_frames = 12;
  std::array<ConvSpec, 4> conv = {
      ConvSpec{{5, 3}, 16, 2, 1},
      ConvSpec{{5, 3}, 32, 2, 1},
      ConvSpec{{5, 3}, 64, 2, 1},
      ConvSpec{{5, 3}, 64, 2, 1},
  };
  std::array<PoolSpec, 2> pool = {PoolSpec{}, PoolSpec{}};
  MaskBranchSpec mask;
  bool shared_mask = true;  // one mask gates conv3 and conv4; false builds one branch per layer
  int dense_hidden = 128;
  int n_classes = 4;
  std::uint64_t init_seed = 1;
};

// Derived intermediate extents; building one validates the whole stack.
struct ShapeWalk {
  int conv_f[4], conv_t[4];      // trunk conv outputs (post same-padding conv)
  int pool_f[2], pool_t[2];
  int mask_pool_f, mask_pool_t;  // inside the mask branch
  int flatten_dim;
  std::int64_t parameter_count;
};

ShapeWalk walk_shapes(const NetworkConfig& config);

enum class ConvTap { Conv1 = 0, Conv2 = 1, Conv3 = 2, Conv4 = 3 };
ConvTap parse_conv_tap(const std::string& name);
const char* conv_tap_name(ConvTap tap);

// Per-layer activations exposed for diagnostics and class-activation maps.
// conv1/conv2 taps are the pre-pool ReLU outputs; conv3/conv4 taps are the
// gated attention outputs.
struct ForwardTrace {
  Tensor input;
  std::array<Tensor, 4> taps;
  Tensor mask3;
  Tensor mask4;  // same tensor as mask3 when the branch is shared
  Tensor logits;
};

struct MaskBranchParams {
  Tensor conv_w, conv_b;
  Tensor proj_w, proj_b;  // fixed 1x1 channel projection ahead of the sigmoid
};

// The phonation-mode classifier: four frequency-biased conv layers with max
// pooling after the first two, a bottom-up top-down soft mask branch gating
// layers 3-4 as H = (1 + M) * T, and two dense layers.
class PhonationNet {
 public:
  explicit PhonationNet(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }
  const ShapeWalk& shapes() const { return shapes_; }
  std::int64_t parameter_count() const { return shapes_.parameter_count; }

  std::vector<Tensor> parameters();
  std::vector<std::pair<std::string, Tensor>> named_parameters();

  ForwardTrace forward_trace(Tape& tape, const Tensor& batch) const;
  Tensor forward(Tape& tape, const Tensor& batch) const;

  // Deep copies of all parameter values, and the reverse.
  std::vector<std::vector<double>> parameter_snapshot();
  void restore_parameters(const std::vector<std::vector<double>>& snapshot);

 private:
  Tensor mask_from(Tape& tape, const Tensor& features, const MaskBranchParams& branch) const;

  NetworkConfig config_;
  ShapeWalk shapes_;
  std::array<Tensor, 4> conv_w_, conv_b_;
  MaskBranchParams mask_a_;  // fed from conv3's input
  MaskBranchParams mask_b_;  // fed from conv4's input; unused when shared
  Tensor fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

// Computes the soft mask for `features` with explicit parameters. The
// network's own forward path routes through this same function.
Tensor mask_branch(Tape& tape, const Tensor& features, const MaskBranchParams& params,
                   const MaskBranchSpec& spec);

// Eq. H = (1 + M) * T applied elementwise; gradients flow to both branches.
Tensor attention_apply(Tape& tape, const Tensor& trunk, const Tensor& mask);

}  // namespace phonation
