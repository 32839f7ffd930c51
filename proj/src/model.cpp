#include "phonation/model.hpp"

#include <cmath>
#include <random>

#include "phonation/errors.hpp"

namespace phonation {

namespace {

void check_filter(const FilterShape& f, const char* where) {
  if (f.freq < 1 || f.time < 1) {
    throw ConfigError(std::string(where) + ": filter extents must be >= 1");
  }
  if (f.time >= f.freq) {
    throw ConfigError(std::string(where) + ": frequency-bias violation, need m < n but got " +
                      std::to_string(f.freq) + "x" + std::to_string(f.time));
  }
}

int conv_out(int extent, int pad, int kernel, const char* where) {
  const int out = extent + 2 * pad - kernel + 1;
  if (out < 1) throw ConfigError(std::string(where) + ": non-positive derived extent");
  return out;
}

int pool_out(int extent, int window, int stride, const char* where) {
  if (window > extent) {
    throw ConfigError(std::string(where) + ": spatial size too small to pool");
  }
  return (extent - window) / stride + 1;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Tensor he_uniform(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape), /*requires_grad=*/true);
  const double limit = std::sqrt(6.0 / fan_in);
  for (auto& v : t.data()) v = limit * (2.0 * uniform01(rng) - 1.0);
  return t;
}

}  // namespace

ShapeWalk walk_shapes(const NetworkConfig& config) {
  if (config.input_bands < 1 || config.input_frames < 1) {
    throw ConfigError("network: input extents must be positive");
  }
  if (config.n_classes != 4) throw ConfigError("network: output layer width must be 4");
  if (config.dense_hidden < 1) throw ConfigError("network: dense hidden width must be >= 1");
  for (int i = 0; i < 4; ++i) check_filter(config.conv[i].filter, "trunk conv");
  check_filter(config.mask.filter, "mask conv");

  ShapeWalk w{};
  int f = config.input_bands, t = config.input_frames;
  std::int64_t params = 0;
  int in_ch = 1;
  for (int i = 0; i < 4; ++i) {
    const auto& c = config.conv[i];
    if (c.out_channels < 1) throw ConfigError("network: conv channels must be >= 1");
    w.conv_f[i] = conv_out(f, c.pad_f, c.filter.freq, "trunk conv");
    w.conv_t[i] = conv_out(t, c.pad_t, c.filter.time, "trunk conv");
    params += static_cast<std::int64_t>(c.out_channels) * in_ch * c.filter.freq * c.filter.time +
              c.out_channels;
    if (i >= 2 && (w.conv_f[i] != f || w.conv_t[i] != t)) {
      throw ConfigError("network: conv3/conv4 must preserve spatial extent for the mask gate");
    }
    f = w.conv_f[i];
    t = w.conv_t[i];
    in_ch = c.out_channels;
    if (i < 2) {
      const auto& p = config.pool[static_cast<std::size_t>(i)];
      w.pool_f[i] = pool_out(f, p.window_f, p.stride_f, "trunk pool");
      w.pool_t[i] = pool_out(t, p.window_t, p.stride_t, "trunk pool");
      f = w.pool_f[i];
      t = w.pool_t[i];
    }
  }
  if (config.shared_mask && config.conv[3].out_channels != config.conv[2].out_channels) {
    throw ConfigError("network: a shared mask requires conv3 and conv4 channel counts to match");
  }

  // Mask branch walked at conv3's input extent; the per-layer variant at
  // conv4's input has the same spatial sizes because conv3 preserves them.
  const int mask_in_f = w.pool_f[1], mask_in_t = w.pool_t[1];
  w.mask_pool_f = pool_out(mask_in_f, config.mask.pool.window_f, config.mask.pool.stride_f,
                           "mask pool");
  w.mask_pool_t = pool_out(mask_in_t, config.mask.pool.window_t, config.mask.pool.stride_t,
                           "mask pool");
  conv_out(w.mask_pool_f, (config.mask.filter.freq - 1) / 2, config.mask.filter.freq, "mask conv");
  conv_out(w.mask_pool_t, (config.mask.filter.time - 1) / 2, config.mask.filter.time, "mask conv");

  auto mask_params = [&](int in_channels, int out_channels) {
    return static_cast<std::int64_t>(config.mask.channels) * in_channels *
               config.mask.filter.freq * config.mask.filter.time +
           config.mask.channels +
           static_cast<std::int64_t>(out_channels) * config.mask.channels + out_channels;
  };
  params += mask_params(config.conv[1].out_channels, config.conv[2].out_channels);
  if (!config.shared_mask) {
    params += mask_params(config.conv[2].out_channels, config.conv[3].out_channels);
  }

  w.flatten_dim = config.conv[3].out_channels * f * t;
  params += static_cast<std::int64_t>(w.flatten_dim) * config.dense_hidden + config.dense_hidden;
  params += static_cast<std::int64_t>(config.dense_hidden) * config.n_classes + config.n_classes;
  w.parameter_count = params;
  return w;
}

ConvTap parse_conv_tap(const std::string& name) {
  if (name == "conv1") return ConvTap::Conv1;
  if (name == "conv2") return ConvTap::Conv2;
  if (name == "conv3") return ConvTap::Conv3;
  if (name == "conv4") return ConvTap::Conv4;
  throw ValueError("unknown layer '" + name + "', expected conv1..conv4");
}

const char* conv_tap_name(ConvTap tap) {
  static const char* names[4] = {"conv1", "conv2", "conv3", "conv4"};
  return names[static_cast<int>(tap)];
}

PhonationNet::PhonationNet(const NetworkConfig& config)
    : config_(config), shapes_(walk_shapes(config)) {
  std::mt19937_64 rng(config.init_seed);
  int in_ch = 1;
  for (int i = 0; i < 4; ++i) {
    const auto& c = config_.conv[static_cast<std::size_t>(i)];
    const int fan_in = in_ch * c.filter.freq * c.filter.time;
    conv_w_[static_cast<std::size_t>(i)] =
        he_uniform({c.out_channels, in_ch, c.filter.freq, c.filter.time}, fan_in, rng);
    conv_b_[static_cast<std::size_t>(i)] = Tensor::zeros({c.out_channels}, true);
    in_ch = c.out_channels;
  }

  auto build_mask = [&](int in_channels, int out_channels) {
    MaskBranchParams p;
    const auto& m = config_.mask;
    p.conv_w = he_uniform({m.channels, in_channels, m.filter.freq, m.filter.time},
                          in_channels * m.filter.freq * m.filter.time, rng);
    p.conv_b = Tensor::zeros({m.channels}, true);
    p.proj_w = he_uniform({out_channels, m.channels, 1, 1}, m.channels, rng);
    p.proj_b = Tensor::zeros({out_channels}, true);
    return p;
  };
  mask_a_ = build_mask(config_.conv[1].out_channels, config_.conv[2].out_channels);
  if (!config_.shared_mask) {
    mask_b_ = build_mask(config_.conv[2].out_channels, config_.conv[3].out_channels);
  }

  fc1_w_ = he_uniform({shapes_.flatten_dim, config_.dense_hidden}, shapes_.flatten_dim, rng);
  fc1_b_ = Tensor::zeros({config_.dense_hidden}, true);
  fc2_w_ = he_uniform({config_.dense_hidden, config_.n_classes}, config_.dense_hidden, rng);
  fc2_b_ = Tensor::zeros({config_.n_classes}, true);
}

std::vector<Tensor> PhonationNet::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> PhonationNet::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int i = 0; i < 4; ++i) {
    const std::string base = "conv" + std::to_string(i + 1);
    out.emplace_back(base + ".weight", conv_w_[static_cast<std::size_t>(i)]);
    out.emplace_back(base + ".bias", conv_b_[static_cast<std::size_t>(i)]);
  }
  out.emplace_back("mask_a.conv.weight", mask_a_.conv_w);
  out.emplace_back("mask_a.conv.bias", mask_a_.conv_b);
  out.emplace_back("mask_a.proj.weight", mask_a_.proj_w);
  out.emplace_back("mask_a.proj.bias", mask_a_.proj_b);
  if (!config_.shared_mask) {
    out.emplace_back("mask_b.conv.weight", mask_b_.conv_w);
    out.emplace_back("mask_b.conv.bias", mask_b_.conv_b);
    out.emplace_back("mask_b.proj.weight", mask_b_.proj_w);
    out.emplace_back("mask_b.proj.bias", mask_b_.proj_b);
  }
  out.emplace_back("fc1.weight", fc1_w_);
  out.emplace_back("fc1.bias", fc1_b_);
  out.emplace_back("fc2.weight", fc2_w_);
  out.emplace_back("fc2.bias", fc2_b_);
  return out;
}

Tensor mask_branch(Tape& tape, const Tensor& features, const MaskBranchParams& params,
                   const MaskBranchSpec& spec) {
  const int f = features.dim(2), t = features.dim(3);
  Tensor pooled = maxpool2d(tape, features, spec.pool.window_f, spec.pool.window_t,
                            spec.pool.stride_f, spec.pool.stride_t);
  Tensor conv = relu(tape, conv2d(tape, pooled, params.conv_w, params.conv_b,
                                  (spec.filter.freq - 1) / 2, (spec.filter.time - 1) / 2));
  Tensor up = upsample_bilinear(tape, conv, f, t);
  Tensor gate = conv2d(tape, up, params.proj_w, params.proj_b, 0, 0);
  return sigmoid(tape, gate);
}

Tensor attention_apply(Tape& tape, const Tensor& trunk, const Tensor& mask) {
  if (trunk.shape() != mask.shape()) {
    throw ShapeError("attention_apply: trunk " + shape_to_string(trunk.shape()) +
                     " vs mask " + shape_to_string(mask.shape()));
  }
  return mul(tape, add_scalar(tape, mask, 1.0), trunk);
}

Tensor PhonationNet::mask_from(Tape& tape, const Tensor& features,
                               const MaskBranchParams& branch) const {
  return mask_branch(tape, features, branch, config_.mask);
}

ForwardTrace PhonationNet::forward_trace(Tape& tape, const Tensor& batch) const {
  if (!batch.defined() || batch.ndim() != 4 || batch.dim(1) != 1 ||
      batch.dim(2) != config_.input_bands || batch.dim(3) != config_.input_frames) {
    throw ShapeError("forward: batch must be [N,1," + std::to_string(config_.input_bands) +
                     "," + std::to_string(config_.input_frames) + "]");
  }

  ForwardTrace trace;
  trace.input = batch;

  Tensor a1 = relu(tape, conv2d(tape, batch, conv_w_[0], conv_b_[0], config_.conv[0].pad_f,
                                config_.conv[0].pad_t));
  Tensor p1 = maxpool2d(tape, a1, config_.pool[0].window_f, config_.pool[0].window_t,
                        config_.pool[0].stride_f, config_.pool[0].stride_t);
  Tensor a2 = relu(tape, conv2d(tape, p1, conv_w_[1], conv_b_[1], config_.conv[1].pad_f,
                                config_.conv[1].pad_t));
  Tensor p2 = maxpool2d(tape, a2, config_.pool[1].window_f, config_.pool[1].window_t,
                        config_.pool[1].stride_f, config_.pool[1].stride_t);

  trace.mask3 = mask_from(tape, p2, mask_a_);
  Tensor t3 = relu(tape, conv2d(tape, p2, conv_w_[2], conv_b_[2], config_.conv[2].pad_f,
                                config_.conv[2].pad_t));
  Tensor g3 = attention_apply(tape, t3, trace.mask3);

  trace.mask4 = config_.shared_mask ? trace.mask3 : mask_from(tape, g3, mask_b_);
  Tensor t4 = relu(tape, conv2d(tape, g3, conv_w_[3], conv_b_[3], config_.conv[3].pad_f,
                                config_.conv[3].pad_t));
  Tensor g4 = attention_apply(tape, t4, trace.mask4);

  Tensor flat = reshape(tape, g4, {batch.dim(0), shapes_.flatten_dim});
  Tensor hidden = relu(tape, dense(tape, flat, fc1_w_, fc1_b_));
  trace.logits = dense(tape, hidden, fc2_w_, fc2_b_);

  trace.taps = {a1, a2, g3, g4};
  return trace;
}

Tensor PhonationNet::forward(Tape& tape, const Tensor& batch) const {
  return forward_trace(tape, batch).logits;
}

std::vector<std::vector<double>> PhonationNet::parameter_snapshot() {
  std::vector<std::vector<double>> snap;
  for (auto& p : parameters()) snap.push_back(p.data());
  return snap;
}

void PhonationNet::restore_parameters(const std::vector<std::vector<double>>& snapshot) {
  auto params = parameters();
  if (snapshot.size() != params.size()) {
    throw ShapeError("restore_parameters: snapshot parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snapshot[i].size() != params[i].data().size()) {
      throw ShapeError("restore_parameters: snapshot shape mismatch");
    }
    params[i].data() = snapshot[i];
  }
}

}  // namespace phonation
