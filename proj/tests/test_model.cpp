#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "phonation/errors.hpp"
#include "phonation/model.hpp"
#include "phonation/ops.hpp"
#include "test_util.hpp"

using namespace phonation;
using testutil::random_tensor;

TEST_CASE("frequency-bias constraint is enforced at construction") {
  NetworkConfig cfg;
  cfg.conv[1].filter = {3, 3};  // square filter: m == n
  CHECK_THROWS_AS(PhonationNet{cfg}, ConfigError);

  NetworkConfig wide;
  wide.conv[0].filter = {3, 5};  // m > n
  wide.conv[0].pad_f = 1;
  wide.conv[0].pad_t = 2;
  CHECK_THROWS_AS(PhonationNet{wide}, ConfigError);

  NetworkConfig mask_bad;
  mask_bad.mask.filter = {3, 3};
  CHECK_THROWS_AS(PhonationNet{mask_bad}, ConfigError);
}

TEST_CASE("shape walk matches the constructed network") {
  NetworkConfig cfg;
  const ShapeWalk walk = walk_shapes(cfg);
  CHECK(walk.conv_f[0] == 128);
  CHECK(walk.conv_t[0] == 12);
  CHECK(walk.pool_f[0] == 64);
  CHECK(walk.pool_t[0] == 6);
  CHECK(walk.pool_f[1] == 32);
  CHECK(walk.pool_t[1] == 3);
  CHECK(walk.mask_pool_f == 16);
  CHECK(walk.mask_pool_t == 1);
  CHECK(walk.flatten_dim == 64 * 32 * 3);

  // parameter count audit against a hand-expanded formula
  const std::int64_t conv1 = 16 * 1 * 5 * 3 + 16;
  const std::int64_t conv2 = 32 * 16 * 5 * 3 + 32;
  const std::int64_t conv3 = 64 * 32 * 5 * 3 + 64;
  const std::int64_t conv4 = 64 * 64 * 5 * 3 + 64;
  const std::int64_t mask = 32 * 32 * 5 * 3 + 32 + 64 * 32 + 64;
  const std::int64_t fc1 = 6144 * 128 + 128;
  const std::int64_t fc2 = 128 * 4 + 4;
  CHECK(walk.parameter_count == conv1 + conv2 + conv3 + conv4 + mask + fc1 + fc2);

  PhonationNet net(cfg);
  std::int64_t total = 0;
  for (auto& p : net.parameters()) total += p.numel();
  CHECK(total == walk.parameter_count);

  NetworkConfig small;
  small.input_bands = 2;  // cannot survive two pools plus the mask pool
  small.input_frames = 2;
  CHECK_THROWS_AS(walk_shapes(small), ConfigError);
}

TEST_CASE("initialization is deterministic per seed") {
  NetworkConfig cfg;
  cfg.init_seed = 1234;
  PhonationNet a(cfg);
  PhonationNet b(cfg);
  auto pa = a.parameters();
  auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].data() == pb[i].data());  // bit-identical
  }

  cfg.init_seed = 1235;
  PhonationNet c(cfg);
  auto pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].data() != pc[i].data()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("forward shapes, batch independence, zero input") {
  NetworkConfig cfg;
  cfg.init_seed = 5;
  PhonationNet net(cfg);

  std::mt19937_64 rng(3);
  Tensor one = random_tensor({1, 1, 128, 12}, rng, false);
  Tape tape;
  Tensor logits = net.forward(tape, one);
  REQUIRE(logits.shape() == std::vector<int>{1, 4});

  // same sample replicated: identical rows
  Tensor batch({8, 1, 128, 12});
  for (int i = 0; i < 8; ++i) {
    std::copy(one.data().begin(), one.data().end(),
              batch.data().begin() + static_cast<std::ptrdiff_t>(i) * one.numel());
  }
  Tape tape2;
  Tensor out = net.forward(tape2, batch);
  for (int i = 0; i < 8; ++i) {
    for (int c = 0; c < 4; ++c) {
      CHECK(out.data()[static_cast<std::size_t>(i * 4 + c)] ==
            doctest::Approx(logits.data()[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
  }

  // zero input, zero biases: logits all equal across classes
  Tensor zeros({2, 1, 128, 12});
  Tape tape3;
  Tensor z = net.forward(tape3, zeros);
  for (int i = 0; i < 2; ++i) {
    for (int c = 1; c < 4; ++c) {
      CHECK(z.data()[static_cast<std::size_t>(i * 4 + c)] ==
            doctest::Approx(z.data()[static_cast<std::size_t>(i * 4)]).epsilon(1e-12));
    }
  }

  Tensor wrong({1, 1, 64, 12});
  CHECK_THROWS_AS(net.forward(tape3, wrong), ShapeError);

  // repeated runs are bit-identical
  Tape t4, t5;
  CHECK(net.forward(t4, one).data() == net.forward(t5, one).data());
}

TEST_CASE("mask values live strictly inside (0,1)") {
  NetworkConfig cfg;
  cfg.init_seed = 11;
  PhonationNet net(cfg);
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({2, 1, 128, 12}, rng, false, -3.0, 3.0);
    Tape tape;
    const ForwardTrace trace = net.forward_trace(tape, x);
    for (double v : trace.mask3.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("mask branch composition matches the primitive-by-primitive oracle") {
  std::mt19937_64 rng(13);
  MaskBranchSpec spec;
  MaskBranchParams params;
  params.conv_w = random_tensor({32, 32, 5, 3}, rng, true, -0.2, 0.2);
  params.conv_b = random_tensor({32}, rng, true, -0.1, 0.1);
  params.proj_w = random_tensor({64, 32, 1, 1}, rng, true, -0.3, 0.3);
  params.proj_b = random_tensor({64}, rng, true, -0.1, 0.1);
  Tensor features = random_tensor({2, 32, 32, 3}, rng, false);

  Tape tape;
  Tensor m = mask_branch(tape, features, params, spec);
  REQUIRE(m.shape() == std::vector<int>{2, 64, 32, 3});

  // independent composition of the five primitives, step by step
  Tape oracle;
  Tensor p = maxpool2d(oracle, features, 2, 2, 2, 2);
  Tensor c = relu(oracle, conv2d(oracle, p, params.conv_w, params.conv_b, 2, 1));
  Tensor u = upsample_bilinear(oracle, c, 32, 3);
  Tensor g = conv2d(oracle, u, params.proj_w, params.proj_b, 0, 0);
  Tensor expected = sigmoid(oracle, g);
  REQUIRE(expected.shape() == m.shape());
  for (std::int64_t i = 0; i < m.numel(); ++i) {
    CHECK(m.data()[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected.data()[static_cast<std::size_t>(i)]).epsilon(1e-15));
  }

  // zero final projection: sigmoid(0) = 0.5 everywhere
  MaskBranchParams flat = params;
  flat.proj_w = Tensor::zeros({64, 32, 1, 1}, true);
  flat.proj_b = Tensor::zeros({64}, true);
  Tape tape2;
  Tensor half = mask_branch(tape2, features, flat, spec);
  for (double v : half.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("attention gate: residual identity and doubling") {
  std::mt19937_64 rng(17);
  Tensor trunk = random_tensor({2, 4, 6, 3}, rng, true);

  Tensor zero_mask = Tensor::zeros({2, 4, 6, 3});
  Tape tape;
  Tensor h0 = attention_apply(tape, trunk, zero_mask);
  CHECK(h0.data() == trunk.data());  // bit-exact at M = 0

  Tensor one_mask = Tensor::full({2, 4, 6, 3}, 1.0);
  Tensor h1 = attention_apply(tape, trunk, one_mask);
  for (std::int64_t i = 0; i < trunk.numel(); ++i) {
    CHECK(h1.data()[static_cast<std::size_t>(i)] ==
          2.0 * trunk.data()[static_cast<std::size_t>(i)]);
  }

  Tensor wrong({2, 4, 6, 2});
  CHECK_THROWS_AS(attention_apply(tape, trunk, wrong), ShapeError);

  // |H| <= 2|T| and sign(H) == sign(T) for M in [0,1]
  for (int trial = 0; trial < 100; ++trial) {
    Tensor t = random_tensor({1, 2, 4, 3}, rng, false, -2.0, 2.0);
    Tensor m = random_tensor({1, 2, 4, 3}, rng, false, 0.0, 1.0);
    Tape tp;
    Tensor h = attention_apply(tp, t, m);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      const double hv = h.data()[static_cast<std::size_t>(i)];
      const double tv = t.data()[static_cast<std::size_t>(i)];
      CHECK(std::abs(hv) <= 2.0 * std::abs(tv) + 1e-15);
      if (tv != 0.0) CHECK(hv * tv >= 0.0);
    }
  }
}

TEST_CASE("attention output is strictly increasing in the mask for positive trunk") {
  Tensor trunk = Tensor::full({1, 1, 2, 1}, 0.75);
  double prev = -1.0;
  for (double mv : {0.0, 0.1, 0.35, 0.7, 1.0}) {
    Tape tape;
    Tensor mask = Tensor::full({1, 1, 2, 1}, mv);
    Tensor h = attention_apply(tape, trunk, mask);
    CHECK(h.data()[0] > prev);
    prev = h.data()[0];
  }
}

TEST_CASE("gradients flow through both attention branches") {
  std::mt19937_64 rng(19);
  Tensor trunk = random_tensor({1, 2, 3, 2}, rng, true);
  Tensor mask = random_tensor({1, 2, 3, 2}, rng, true, 0.1, 0.9);
  Tensor coeffs = random_tensor({1, 2, 3, 2}, rng, false);

  auto forward = [&]() {
    Tape t;
    Tensor h = attention_apply(t, trunk, mask);
    return sum_all(t, mul(t, h, coeffs)).item();
  };
  {
    Tape t;
    Tensor h = attention_apply(t, trunk, mask);
    Tensor loss = sum_all(t, mul(t, h, coeffs));
    t.backward(loss);
  }
  for (Tensor* t : {&trunk, &mask}) {
    const auto result = testutil::check_gradient(*t, t->grad(), forward, 20, rng);
    CHECK(result.worst_rel <= 1e-4);
  }
}

TEST_CASE("full network gradient check against finite differences") {
  NetworkConfig cfg;
  cfg.init_seed = 99;
  PhonationNet net(cfg);
  std::mt19937_64 rng(7);
  Tensor batch = random_tensor({2, 1, 128, 12}, rng, false, 0.0, 2.0);
  const std::vector<int> labels = {1, 3};

  auto forward = [&]() {
    Tape tape;
    Tensor logits = net.forward(tape, batch);
    return softmax_cross_entropy(tape, logits, labels).item();
  };
  {
    Tape tape;
    Tensor logits = net.forward(tape, batch);
    Tensor loss = softmax_cross_entropy(tape, logits, labels);
    tape.backward(loss);
  }
  for (auto& [name, param] : net.named_parameters()) {
    const auto result = testutil::check_gradient(param, param.grad(), forward, 10, rng);
    INFO("parameter ", name);
    CHECK(result.worst_rel <= 1e-4);
  }
}

TEST_CASE("per-layer mask variant builds and runs") {
  NetworkConfig cfg;
  cfg.shared_mask = false;
  cfg.init_seed = 21;
  PhonationNet net(cfg);
  CHECK(net.parameters().size() == 20);  // 4 extra mask-branch tensors

  std::mt19937_64 rng(23);
  Tensor x = random_tensor({1, 1, 128, 12}, rng, false);
  Tape tape;
  const ForwardTrace trace = net.forward_trace(tape, x);
  CHECK(trace.logits.shape() == std::vector<int>{1, 4});
  for (double v : trace.mask4.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("conv tap names") {
  CHECK(parse_conv_tap("conv1") == ConvTap::Conv1);
  CHECK(parse_conv_tap("conv4") == ConvTap::Conv4);
  CHECK_THROWS_AS(parse_conv_tap("conv9"), ValueError);
  CHECK(std::string(conv_tap_name(ConvTap::Conv3)) == "conv3");
}
