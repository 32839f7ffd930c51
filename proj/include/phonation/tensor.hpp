#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace phonation {

class Tape;

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Dense n-dimensional value grid (row-major doubles) that can participate in
// reverse-mode differentiation. Tensor is a shared handle: copies refer to
// the same storage, which is what lets a Tape hold the graph alive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const;
  int dim(int axis) const;
  std::int64_t numel() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool value);

  // Gradient storage, allocated as zeros on first access. A parameter that
  // never participated in a backward pass therefore reads as all-zero grad.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  // Deep copy detached from any tape (no producer, grad not copied).
  Tensor detached_copy() const;

  // True when this tensor was produced by an op recorded on `tape`.
  bool produced_by(const Tape& tape) const;
  bool is_leaf() const;

  struct Node;
  Node* node() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until touched
  bool requires_grad = false;
  const Tape* producer = nullptr;
};

// Ordered record of executed primitives. Ops append themselves during the
// forward pass; backward() replays the pull closures last-to-first, which is
// reverse topological order by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `out` as produced on this tape. `pull` must accumulate the
  // op's contribution into each input's grad, reading out's grad.
  void record(const Tensor& out, std::vector<Tensor> inputs, std::function<void()> pull);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every tensor
  // recorded on this tape. Grads touched by the tape are reset first, so
  // repeated calls do not double-count.
  void backward(const Tensor& loss);

  std::size_t size() const { return steps_.size(); }

 private:
  struct Step {
    Tensor out;
    std::vector<Tensor> inputs;
    std::function<void()> pull;
  };
  std::vector<Step> steps_;
};

// Hard failure on any non-finite value; active only in debug builds.
void debug_check_finite(const Tensor& t, const char* where);

}  // namespace phonation
