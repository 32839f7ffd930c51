#pragma once

#include <vector>

#include "phonation/tensor.hpp"

namespace phonation {

// Differentiable primitives. Every op validates shapes, computes the forward
// result, and records its pull closure on the tape. Axis convention for 4-d
// tensors is (batch, channel, frequency, time).

// Cross-correlation of input [N,C,H,W] with kernels [K,C,n,m] and bias [K].
// Output spatial extent must divide exactly: (H + 2*pad_f - n) % stride_f == 0.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int pad_f, int pad_t, int stride_f = 1, int stride_t = 1);

// Valid max pooling; backward routes gradient to the first maximum of each
// window in row-major order.
Tensor maxpool2d(Tape& tape, const Tensor& input, int window_f, int window_t,
                 int stride_f, int stride_t);

// Align-corners bilinear interpolation to (out_f, out_t) >= input extent.
Tensor upsample_bilinear(Tape& tape, const Tensor& input, int out_f, int out_t);

// Affine map: input [N,D] x weight [D,O] + bias [O].
Tensor dense(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& input);
Tensor sigmoid(Tape& tape, const Tensor& input);

// Elementwise helpers used by the attention block and by tests.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_scalar(Tape& tape, const Tensor& a, double c);
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor reshape(Tape& tape, const Tensor& input, std::vector<int> shape);
Tensor sum_all(Tape& tape, const Tensor& input);

// Extracts one element of a 2-d tensor as a scalar (used to seed backward
// from a single logit).
Tensor pick(Tape& tape, const Tensor& input, int row, int col);

// Mean over the batch of -log softmax(logits)[label]; log-sum-exp stabilized.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Row-wise softmax probabilities of logits [N,C]; forward-only convenience.
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace phonation
