#include "phonation/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "phonation/errors.hpp"

namespace phonation {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data.assign(static_cast<std::size_t>(shape_numel(node_->shape)), 0.0);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  if (shape_numel(t.node_->shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("from_data: " + std::to_string(data.size()) + " values for shape " +
                     shape_to_string(t.node_->shape));
  }
  t.node_->data = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }

int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= ndim()) throw ShapeError("dim: axis out of range");
  return node_->shape[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->data.size()); }

std::vector<double>& Tensor::data() { return node_->data; }
const std::vector<double>& Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor is not scalar, shape " + shape_to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detached_copy() const {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = node_->shape;
  t.node_->data = node_->data;
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

bool Tensor::produced_by(const Tape& tape) const {
  return defined() && node_->producer == &tape;
}

bool Tensor::is_leaf() const { return node_->producer == nullptr; }

void Tape::record(const Tensor& out, std::vector<Tensor> inputs, std::function<void()> pull) {
  out.node()->producer = this;
  steps_.push_back(Step{out, std::move(inputs), std::move(pull)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ValueError("backward: loss must be a defined scalar tensor");
  }
  if (!loss.produced_by(*this)) {
    throw ValueError("backward: loss is detached from this tape");
  }
  for (auto& step : steps_) {
    step.out.zero_grad();
    for (auto& in : step.inputs) in.zero_grad();
  }
  Tensor seed = loss;  // shared handle; grants mutable grad access
  seed.grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    it->pull();
#ifndef NDEBUG
    for (auto& in : it->inputs) debug_check_finite(in, "backward");
#endif
  }
}

void debug_check_finite(const Tensor& t, const char* where) {
#ifndef NDEBUG
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw Error(std::string(where) + ": non-finite tensor value");
  }
  if (t.has_grad()) {
    for (double v : t.grad()) {
      if (!std::isfinite(v)) throw Error(std::string(where) + ": non-finite gradient value");
    }
  }
#else
  (void)t;
  (void)where;
#endif
}

}  // namespace phonation
