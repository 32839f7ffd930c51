#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "phonation/adam.hpp"
#include "phonation/errors.hpp"
#include "phonation/ops.hpp"
#include "phonation/tensor.hpp"
#include "test_util.hpp"

using namespace phonation;
using testutil::check_gradient;
using testutil::random_tensor;

namespace {

// Fixed random linear functional of y so every output element contributes to
// the scalar loss used by the gradient checks.
Tensor weighted_sum(Tape& tape, const Tensor& y, const Tensor& coeffs) {
  return sum_all(tape, mul(tape, y, coeffs));
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.shape() == std::vector<int>{2, 3});
  CHECK_FALSE(t.requires_grad());
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);

  Tensor s = Tensor::from_data({1}, {4.5});
  CHECK(s.item() == doctest::Approx(4.5));
}

TEST_CASE("backward validates the loss") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor y = relu(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ValueError);  // not scalar

  Tensor detached = Tensor::from_data({1}, {1.0});
  CHECK_THROWS_AS(tape.backward(detached), ValueError);

  Tape other;
  Tensor z = sum_all(other, x);
  CHECK_THROWS_AS(tape.backward(z), ValueError);  // produced on another tape
}

TEST_CASE("backward of sum and of sum of squares") {
  Tape tape;
  Tensor x = Tensor::from_data({4}, {1.0, -2.0, 3.0, 0.5}, true);
  Tensor loss = sum_all(tape, x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));

  Tape tape2;
  Tensor sq = mul(tape2, x, x);
  Tensor loss2 = sum_all(tape2, sq);
  tape2.backward(loss2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
  }
}

TEST_CASE("unused parameters read zero grad") {
  Tensor unused({3, 3}, true);
  CHECK(unused.grad().size() == 9);
  for (double g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("conv2d identity and constant kernels") {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({1, 1, 4, 4}, rng, false);

  // 1x1 kernel with weight 1 and zero bias is the identity map.
  Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0}, true);
  Tensor b = Tensor::zeros({1}, true);
  Tape tape;
  Tensor y = conv2d(tape, x, w, b, 0, 0);
  REQUIRE(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    CHECK(y.data()[static_cast<std::size_t>(i)] ==
          x.data()[static_cast<std::size_t>(i)]);
  }

  // all-ones 3x3 kernel over an all-ones 5x5 input sums to 9 everywhere
  Tensor ones = Tensor::full({1, 1, 5, 5}, 1.0);
  Tensor w9 = Tensor::full({1, 1, 3, 3}, 1.0, true);
  Tape tape2;
  Tensor y9 = conv2d(tape2, ones, w9, b, 0, 0);
  REQUIRE(y9.shape() == std::vector<int>{1, 1, 3, 3});
  for (double v : y9.data()) CHECK(v == doctest::Approx(9.0));
}

TEST_CASE("conv2d rejects bad geometry") {
  Tensor x({1, 1, 4, 4});
  Tensor w({1, 1, 3, 3}, true);
  Tensor b({1}, true);
  Tape tape;
  CHECK_THROWS_AS(conv2d(tape, x, w, b, 0, 0, 2, 2), ShapeError);  // (4-3)%2 != 0
  Tensor w_big({1, 1, 7, 7}, true);
  CHECK_THROWS_AS(conv2d(tape, x, w_big, b, 0, 0), ShapeError);
  Tensor w_ch({1, 2, 3, 3}, true);
  CHECK_THROWS_AS(conv2d(tape, x, w_ch, b, 0, 0), ShapeError);
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({2, 1, 4, 3}, rng, true);
  Tensor w = random_tensor({2, 1, 3, 1}, rng, true);
  Tensor b = random_tensor({2}, rng, true);
  Tensor coeffs;

  auto forward = [&]() {
    Tape tape;
    Tensor y = conv2d(tape, x, w, b, 1, 0);
    return weighted_sum(tape, y, coeffs).item();
  };

  {
    Tape tape;
    Tensor y = conv2d(tape, x, w, b, 1, 0);
    coeffs = random_tensor(y.shape(), rng, false);
    Tensor loss = weighted_sum(tape, y, coeffs);
    tape.backward(loss);
  }
  for (Tensor* t : {&x, &w, &b}) {
    const auto result = check_gradient(*t, t->grad(), forward, 20, rng);
    CHECK(result.worst_rel <= 1e-4);
  }
}

TEST_CASE("maxpool2d values, ties, and gradients") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  Tape tape;
  Tensor y = maxpool2d(tape, x, 2, 2, 2, 2);
  CHECK(y.numel() == 1);
  CHECK(y.data()[0] == doctest::Approx(4.0));

  // constant input: gradient lands on each window's first element
  Tensor c = Tensor::full({1, 1, 4, 4}, 3.14, true);
  Tape tape2;
  Tensor yc = maxpool2d(tape2, c, 2, 2, 2, 2);
  Tensor loss = sum_all(tape2, yc);
  tape2.backward(loss);
  const auto& g = c.grad();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double expect = (i % 2 == 0 && j % 2 == 0) ? 1.0 : 0.0;
      CHECK(g[static_cast<std::size_t>(i * 4 + j)] == expect);
    }
  }

  CHECK_THROWS_AS(maxpool2d(tape2, x, 3, 3, 1, 1), ShapeError);

  std::mt19937_64 rng(13);
  Tensor r = random_tensor({2, 2, 6, 4}, rng, true);
  Tensor coeffs;
  auto forward = [&]() {
    Tape t;
    Tensor out = maxpool2d(t, r, 2, 2, 2, 2);
    return weighted_sum(t, out, coeffs).item();
  };
  {
    Tape t;
    Tensor out = maxpool2d(t, r, 2, 2, 2, 2);
    coeffs = random_tensor(out.shape(), rng, false);
    Tensor loss2 = weighted_sum(t, out, coeffs);
    t.backward(loss2);
  }
  const auto result = check_gradient(r, r.grad(), forward, 20, rng);
  CHECK(result.worst_rel <= 1e-4);
}

TEST_CASE("upsample_bilinear identity, constant, and closed form") {
  std::mt19937_64 rng(17);
  Tensor x = random_tensor({1, 1, 3, 3}, rng, true);
  Tape tape;
  Tensor same = upsample_bilinear(tape, x, 3, 3);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    CHECK(same.data()[static_cast<std::size_t>(i)] == x.data()[static_cast<std::size_t>(i)]);
  }

  Tensor single = Tensor::from_data({1, 1, 1, 1}, {2.5});
  Tensor blown = upsample_bilinear(tape, single, 4, 5);
  for (double v : blown.data()) CHECK(v == doctest::Approx(2.5));

  // 2x2 -> 3x3 align-corners: center is the mean of the four corners
  Tensor c = Tensor::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor c3 = upsample_bilinear(tape, c, 3, 3);
  CHECK(c3.data()[4] == doctest::Approx(2.5));
  CHECK(c3.data()[1] == doctest::Approx(1.5));
  CHECK(c3.data()[3] == doctest::Approx(2.0));

  CHECK_THROWS_AS(upsample_bilinear(tape, x, 2, 3), ShapeError);

  Tensor coeffs;
  auto forward = [&]() {
    Tape t;
    Tensor out = upsample_bilinear(t, x, 7, 5);
    return weighted_sum(t, out, coeffs).item();
  };
  {
    Tape t;
    Tensor out = upsample_bilinear(t, x, 7, 5);
    coeffs = random_tensor(out.shape(), rng, false);
    Tensor loss = weighted_sum(t, out, coeffs);
    t.backward(loss);
  }
  const auto result = check_gradient(x, x.grad(), forward, 20, rng);
  CHECK(result.worst_rel <= 1e-4);
}

TEST_CASE("dense, relu, sigmoid basics and gradients") {
  std::mt19937_64 rng(19);

  // identity weight, zero bias
  Tensor eye = Tensor::zeros({3, 3}, true);
  for (int i = 0; i < 3; ++i) eye.data()[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  Tensor zb = Tensor::zeros({3}, true);
  Tensor x = random_tensor({2, 3}, rng, true);
  Tape tape;
  Tensor y = dense(tape, x, eye, zb);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    CHECK(y.data()[static_cast<std::size_t>(i)] == doctest::Approx(x.data()[static_cast<std::size_t>(i)]));
  }

  Tensor zero = Tensor::from_data({1}, {0.0});
  Tensor sig = sigmoid(tape, zero);
  CHECK(sig.item() == doctest::Approx(0.5));

  // strict range even at saturation
  Tensor hard = Tensor::from_data({2}, {1000.0, -1000.0});
  Tensor sat = sigmoid(tape, hard);
  CHECK(sat.data()[0] < 1.0);
  CHECK(sat.data()[0] > 0.0);
  CHECK(sat.data()[1] > 0.0);
  CHECK(sat.data()[1] < 1.0);

  Tensor w = random_tensor({3, 4}, rng, true);
  Tensor b = random_tensor({4}, rng, true);
  Tensor coeffs;
  auto forward = [&]() {
    Tape t;
    Tensor h = dense(t, x, w, b);
    Tensor r = relu(t, h);
    Tensor s = sigmoid(t, r);
    return weighted_sum(t, s, coeffs).item();
  };
  {
    Tape t;
    Tensor h = dense(t, x, w, b);
    Tensor r = relu(t, h);
    Tensor s = sigmoid(t, r);
    coeffs = random_tensor(s.shape(), rng, false);
    Tensor loss = weighted_sum(t, s, coeffs);
    t.backward(loss);
  }
  for (Tensor* t : {&x, &w, &b}) {
    const auto result = check_gradient(*t, t->grad(), forward, 20, rng);
    CHECK(result.worst_rel <= 1e-4);
  }
}

TEST_CASE("softmax cross entropy values and gradient") {
  Tape tape;
  Tensor uniform_logits = Tensor::zeros({1, 4}, true);
  Tensor loss = softmax_cross_entropy(tape, uniform_logits, {2});
  CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor confident = Tensor::zeros({1, 4}, true);
  confident.data()[1] = 100.0;
  Tape tape2;
  Tensor tiny = softmax_cross_entropy(tape2, confident, {1});
  CHECK(tiny.item() < 1e-10);

  CHECK_THROWS_AS(softmax_cross_entropy(tape2, confident, {4}), ValueError);
  CHECK_THROWS_AS(softmax_cross_entropy(tape2, confident, {-1}), ValueError);

  std::mt19937_64 rng(23);
  Tensor logits = random_tensor({5, 4}, rng, true, -2.0, 2.0);
  std::vector<int> labels = {0, 3, 1, 2, 2};
  auto forward = [&]() {
    Tape t;
    return softmax_cross_entropy(t, logits, labels).item();
  };
  {
    Tape t;
    Tensor l = softmax_cross_entropy(t, logits, labels);
    t.backward(l);
  }
  const auto result = check_gradient(logits, logits.grad(), forward, 20, rng);
  CHECK(result.worst_rel <= 1e-4);

  // softmax rows sum to one within 1e-12
  const auto probs = softmax_rows(logits);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += probs[static_cast<std::size_t>(i * 4 + j)];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("adam: zero gradient with zero decay leaves parameters unchanged") {
  Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  std::vector<Tensor> params = {p};
  AdamState state;
  state.weight_decay = 0.0;
  adam_step(params, state, 0.001);
  CHECK(p.data()[0] == doctest::Approx(1.0));
  CHECK(p.data()[1] == doctest::Approx(-2.0));
  CHECK(p.data()[2] == doctest::Approx(0.5));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step moves against the gradient sign by about lr") {
  Tensor p = Tensor::from_data({2}, {0.3, -0.4}, true);
  p.grad()[0] = 0.7;
  p.grad()[1] = -0.2;
  std::vector<Tensor> params = {p};
  AdamState state;
  state.weight_decay = 0.0;
  const double lr = 0.001;
  adam_step(params, state, lr);
  CHECK(p.data()[0] == doctest::Approx(0.3 - lr).epsilon(1e-3));
  CHECK(p.data()[1] == doctest::Approx(-0.4 + lr).epsilon(1e-3));
}

TEST_CASE("adam: 100 constant-gradient steps match a scalar reimplementation") {
  Tensor p = Tensor::from_data({1}, {1.0}, true);
  p.grad()[0] = 1.0;
  std::vector<Tensor> params = {p};
  AdamState state;  // defaults: wd 1e-4, beta 0.9/0.999, eps 1e-8
  const double lr = 0.01;

  // independent scalar oracle
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    theta -= lr * state.weight_decay * theta;
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    theta -= lr * mh / (std::sqrt(vh) + 1e-8);

    adam_step(params, state, lr);
    p.grad()[0] = 1.0;  // keep the gradient constant
  }
  CHECK(std::abs(p.data()[0] - theta) <= 1e-12);
}

TEST_CASE("forward results are deterministic") {
  std::mt19937_64 rng(29);
  Tensor x = random_tensor({2, 1, 8, 6}, rng, false);
  Tensor w = random_tensor({3, 1, 3, 1}, rng, true);
  Tensor b = random_tensor({3}, rng, true);
  auto run = [&]() {
    Tape t;
    Tensor y = relu(t, conv2d(t, x, w, b, 1, 0));
    return y.data();
  };
  CHECK(run() == run());
}
