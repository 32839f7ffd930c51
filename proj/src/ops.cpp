#include "phonation/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "phonation/errors.hpp"

namespace phonation {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

// Unpacks one sample [C,H,W] into rows of patches [H_out*W_out, C*n*m],
// zero-filled where the padded window leaves the input.
void im2col(const double* x, int C, int H, int W, int n, int m, int pad_f, int pad_t,
            int stride_f, int stride_t, int H_out, int W_out, double* col) {
  const int patch = C * n * m;
  for (int oh = 0; oh < H_out; ++oh) {
    for (int ow = 0; ow < W_out; ++ow) {
      double* row = col + (static_cast<std::int64_t>(oh) * W_out + ow) * patch;
      const int h0 = oh * stride_f - pad_f;
      const int w0 = ow * stride_t - pad_t;
      for (int c = 0; c < C; ++c) {
        const double* plane = x + static_cast<std::int64_t>(c) * H * W;
        for (int i = 0; i < n; ++i) {
          const int ih = h0 + i;
          double* dst = row + (c * n + i) * m;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + m, 0.0);
            continue;
          }
          for (int j = 0; j < m; ++j) {
            const int iw = w0 + j;
            dst[j] = (iw < 0 || iw >= W) ? 0.0 : plane[static_cast<std::int64_t>(ih) * W + iw];
          }
        }
      }
    }
  }
}

// Scatter-add of patch-row gradients back onto the input sample.
void col2im(const double* col, int C, int H, int W, int n, int m, int pad_f, int pad_t,
            int stride_f, int stride_t, int H_out, int W_out, double* dx) {
  const int patch = C * n * m;
  for (int oh = 0; oh < H_out; ++oh) {
    for (int ow = 0; ow < W_out; ++ow) {
      const double* row = col + (static_cast<std::int64_t>(oh) * W_out + ow) * patch;
      const int h0 = oh * stride_f - pad_f;
      const int w0 = ow * stride_t - pad_t;
      for (int c = 0; c < C; ++c) {
        double* plane = dx + static_cast<std::int64_t>(c) * H * W;
        for (int i = 0; i < n; ++i) {
          const int ih = h0 + i;
          if (ih < 0 || ih >= H) continue;
          const double* src = row + (c * n + i) * m;
          for (int j = 0; j < m; ++j) {
            const int iw = w0 + j;
            if (iw >= 0 && iw < W) plane[static_cast<std::int64_t>(ih) * W + iw] += src[j];
          }
        }
      }
    }
  }
}

double stable_sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    s = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  // Keep the output strictly inside (0,1) even at saturation.
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  const double lo = std::numeric_limits<double>::min();
  return std::min(hi, std::max(lo, s));
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int pad_f, int pad_t, int stride_f, int stride_t) {
  require(input.defined() && input.ndim() == 4, "conv2d: input must be [N,C,H,W]");
  require(weight.defined() && weight.ndim() == 4, "conv2d: weight must be [K,C,n,m]");
  require(bias.defined() && bias.ndim() == 1, "conv2d: bias must be [K]");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = weight.dim(0), n = weight.dim(2), m = weight.dim(3);
  require(weight.dim(1) == C, "conv2d: channel mismatch between input and weight");
  require(bias.dim(0) == K, "conv2d: bias length must equal kernel count");
  if (pad_f < 0 || pad_t < 0 || stride_f < 1 || stride_t < 1) {
    throw ShapeError("conv2d: padding must be >= 0 and stride >= 1");
  }
  const int span_f = H + 2 * pad_f - n;
  const int span_t = W + 2 * pad_t - m;
  if (span_f < 0 || span_t < 0) throw ShapeError("conv2d: kernel does not fit padded input");
  if (span_f % stride_f != 0 || span_t % stride_t != 0) {
    throw ShapeError("conv2d: non-integer output size");
  }
  const int H_out = span_f / stride_f + 1;
  const int W_out = span_t / stride_t + 1;
  const int HW = H_out * W_out;
  const int patch = C * n * m;

  // Per-sample im2col + gemm: the patch matrix stays cache-resident across
  // its uses, which beats one huge batched gemm on this workload.
  Tensor out({N, K, H_out, W_out});
  std::vector<double> colbuf(static_cast<std::size_t>(HW) * patch);
  ConstMap Wm(weight.data().data(), K, patch);
  for (int s = 0; s < N; ++s) {
    const double* x = input.data().data() + static_cast<std::int64_t>(s) * C * H * W;
    im2col(x, C, H, W, n, m, pad_f, pad_t, stride_f, stride_t, H_out, W_out, colbuf.data());
    ConstMap Xc(colbuf.data(), HW, patch);
    double* y = out.data().data() + static_cast<std::int64_t>(s) * K * HW;
    MutMap Ym(y, K, HW);
    Ym.noalias() = Wm * Xc.transpose();
    for (int k = 0; k < K; ++k) {
      const double bk = bias.data()[static_cast<std::size_t>(k)];
      for (int i = 0; i < HW; ++i) y[static_cast<std::int64_t>(k) * HW + i] += bk;
    }
  }
  debug_check_finite(out, "conv2d");

  const bool need_dx = input.requires_grad() || !input.is_leaf();
  tape.record(out, {input, weight, bias},
              [=, inp = input, w = weight, b = bias, o = out]() mutable {
                std::vector<double> col(static_cast<std::size_t>(HW) * patch);
                std::vector<double> dcol(static_cast<std::size_t>(HW) * patch);
                ConstMap Wmap(w.data().data(), K, patch);
                MutMap dW(w.grad().data(), K, patch);
                auto& db = b.grad();
                auto& dx_all = inp.grad();
                for (int s = 0; s < N; ++s) {
                  const double* x = inp.data().data() + static_cast<std::int64_t>(s) * C * H * W;
                  ConstMap dY(o.grad().data() + static_cast<std::int64_t>(s) * K * HW, K, HW);
                  im2col(x, C, H, W, n, m, pad_f, pad_t, stride_f, stride_t, H_out, W_out,
                         col.data());
                  ConstMap Xc(col.data(), HW, patch);
                  if (w.requires_grad()) dW.noalias() += dY * Xc;
                  if (b.requires_grad()) {
                    // plain loops: Eigen reductions round differently per
                    // pointer alignment, which breaks bit reproducibility
                    const double* g = o.grad().data() + static_cast<std::int64_t>(s) * K * HW;
                    for (int k = 0; k < K; ++k) {
                      double acc = 0.0;
                      for (int i = 0; i < HW; ++i) acc += g[static_cast<std::int64_t>(k) * HW + i];
                      db[static_cast<std::size_t>(k)] += acc;
                    }
                  }
                  if (need_dx) {
                    MutMap dXc(dcol.data(), HW, patch);
                    dXc.noalias() = dY.transpose() * Wmap;
                    col2im(dcol.data(), C, H, W, n, m, pad_f, pad_t, stride_f, stride_t, H_out,
                           W_out, dx_all.data() + static_cast<std::int64_t>(s) * C * H * W);
                  }
                }
              });
  return out;
}

Tensor maxpool2d(Tape& tape, const Tensor& input, int window_f, int window_t, int stride_f,
                 int stride_t) {
  require(input.defined() && input.ndim() == 4, "maxpool2d: input must be [N,C,H,W]");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (window_f < 1 || window_t < 1 || stride_f < 1 || stride_t < 1) {
    throw ShapeError("maxpool2d: window and stride must be >= 1");
  }
  if (window_f > H || window_t > W) throw ShapeError("maxpool2d: window larger than input");
  const int H_out = (H - window_f) / stride_f + 1;
  const int W_out = (W - window_t) / stride_t + 1;

  Tensor out({N, C, H_out, W_out});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
  const auto& x = input.data();
  auto& y = out.data();
  std::int64_t oi = 0;
  for (int s = 0; s < N; ++s) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(s) * C + c) * H * W;
      for (int oh = 0; oh < H_out; ++oh) {
        for (int ow = 0; ow < W_out; ++ow, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = -1;
          for (int i = 0; i < window_f; ++i) {
            const std::int64_t roff = base + static_cast<std::int64_t>(oh * stride_f + i) * W;
            for (int j = 0; j < window_t; ++j) {
              const std::int64_t idx = roff + ow * stride_t + j;
              if (x[idx] > best) {  // strict: first maximum wins on ties
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          y[oi] = best;
          (*argmax)[oi] = best_idx;
        }
      }
    }
  }
  debug_check_finite(out, "maxpool2d");

  tape.record(out, {input}, [inp = input, o = out, argmax]() mutable {
    auto& dx = inp.grad();
    const auto& dy = o.grad();
    for (std::int64_t i = 0; i < o.numel(); ++i) dx[(*argmax)[i]] += dy[i];
  });
  return out;
}

Tensor upsample_bilinear(Tape& tape, const Tensor& input, int out_f, int out_t) {
  require(input.defined() && input.ndim() == 4, "upsample_bilinear: input must be [N,C,h,w]");
  const int N = input.dim(0), C = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (out_f < h || out_t < w) throw ShapeError("upsample_bilinear: downscaling request");

  // Align-corners source coordinate per output index; degenerate axes map to 0.
  const double sf = (out_f > 1) ? static_cast<double>(h - 1) / (out_f - 1) : 0.0;
  const double st = (out_t > 1) ? static_cast<double>(w - 1) / (out_t - 1) : 0.0;

  Tensor out({N, C, out_f, out_t});
  const auto& x = input.data();
  auto& y = out.data();
  for (int s = 0; s < N; ++s) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t ibase = (static_cast<std::int64_t>(s) * C + c) * h * w;
      const std::int64_t obase = (static_cast<std::int64_t>(s) * C + c) * out_f * out_t;
      for (int oi = 0; oi < out_f; ++oi) {
        const double fi = oi * sf;
        const int i0 = static_cast<int>(fi);
        const int i1 = std::min(i0 + 1, h - 1);
        const double wi = fi - i0;
        for (int oj = 0; oj < out_t; ++oj) {
          const double fj = oj * st;
          const int j0 = static_cast<int>(fj);
          const int j1 = std::min(j0 + 1, w - 1);
          const double wj = fj - j0;
          y[obase + static_cast<std::int64_t>(oi) * out_t + oj] =
              (1.0 - wi) * (1.0 - wj) * x[ibase + static_cast<std::int64_t>(i0) * w + j0] +
              (1.0 - wi) * wj * x[ibase + static_cast<std::int64_t>(i0) * w + j1] +
              wi * (1.0 - wj) * x[ibase + static_cast<std::int64_t>(i1) * w + j0] +
              wi * wj * x[ibase + static_cast<std::int64_t>(i1) * w + j1];
        }
      }
    }
  }
  debug_check_finite(out, "upsample_bilinear");

  tape.record(out, {input}, [inp = input, o = out, N, C, h, w, out_f, out_t, sf, st]() mutable {
    auto& dx = inp.grad();
    const auto& dy = o.grad();
    for (int s = 0; s < N; ++s) {
      for (int c = 0; c < C; ++c) {
        const std::int64_t ibase = (static_cast<std::int64_t>(s) * C + c) * h * w;
        const std::int64_t obase = (static_cast<std::int64_t>(s) * C + c) * out_f * out_t;
        for (int oi = 0; oi < out_f; ++oi) {
          const double fi = oi * sf;
          const int i0 = static_cast<int>(fi);
          const int i1 = std::min(i0 + 1, h - 1);
          const double wi = fi - i0;
          for (int oj = 0; oj < out_t; ++oj) {
            const double fj = oj * st;
            const int j0 = static_cast<int>(fj);
            const int j1 = std::min(j0 + 1, w - 1);
            const double wj = fj - j0;
            const double g = dy[obase + static_cast<std::int64_t>(oi) * out_t + oj];
            dx[ibase + static_cast<std::int64_t>(i0) * w + j0] += (1.0 - wi) * (1.0 - wj) * g;
            dx[ibase + static_cast<std::int64_t>(i0) * w + j1] += (1.0 - wi) * wj * g;
            dx[ibase + static_cast<std::int64_t>(i1) * w + j0] += wi * (1.0 - wj) * g;
            dx[ibase + static_cast<std::int64_t>(i1) * w + j1] += wi * wj * g;
          }
        }
      }
    }
  });
  return out;
}

Tensor dense(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.defined() && input.ndim() == 2, "dense: input must be [N,D]");
  require(weight.defined() && weight.ndim() == 2, "dense: weight must be [D,O]");
  require(bias.defined() && bias.ndim() == 1, "dense: bias must be [O]");
  const int N = input.dim(0), D = input.dim(1), O = weight.dim(1);
  require(weight.dim(0) == D, "dense: weight rows must match input width");
  require(bias.dim(0) == O, "dense: bias length must match output width");

  Tensor out({N, O});
  ConstMap X(input.data().data(), N, D);
  ConstMap Wm(weight.data().data(), D, O);
  MutMap Y(out.data().data(), N, O);
  Y.noalias() = X * Wm;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < O; ++j) Y(i, j) += bias.data()[j];
  }
  debug_check_finite(out, "dense");

  const bool need_dx = input.requires_grad() || !input.is_leaf();
  tape.record(out, {input, weight, bias},
              [inp = input, w = weight, b = bias, o = out, N, D, O, need_dx]() mutable {
                ConstMap dY(o.grad().data(), N, O);
                if (w.requires_grad()) {
                  ConstMap X(inp.data().data(), N, D);
                  MutMap dW(w.grad().data(), D, O);
                  dW.noalias() += X.transpose() * dY;
                }
                if (b.requires_grad()) {
                  auto& db = b.grad();
                  const double* g = o.grad().data();
                  for (int i = 0; i < N; ++i) {
                    for (int j = 0; j < O; ++j) {
                      db[static_cast<std::size_t>(j)] += g[static_cast<std::int64_t>(i) * O + j];
                    }
                  }
                }
                if (need_dx) {
                  ConstMap Wm(w.data().data(), D, O);
                  MutMap dX(inp.grad().data(), N, D);
                  dX.noalias() += dY * Wm.transpose();
                }
              });
  return out;
}

Tensor relu(Tape& tape, const Tensor& input) {
  require(input.defined(), "relu: undefined input");
  Tensor out(input.shape());
  const auto& x = input.data();
  auto& y = out.data();
  for (std::int64_t i = 0; i < input.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  tape.record(out, {input}, [inp = input, o = out]() mutable {
    auto& dx = inp.grad();
    const auto& dy = o.grad();
    const auto& x = inp.data();
    for (std::int64_t i = 0; i < inp.numel(); ++i) {
      if (x[i] > 0.0) dx[i] += dy[i];  // subgradient 0 at x == 0
    }
  });
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& input) {
  require(input.defined(), "sigmoid: undefined input");
  Tensor out(input.shape());
  const auto& x = input.data();
  auto& y = out.data();
  for (std::int64_t i = 0; i < input.numel(); ++i) y[i] = stable_sigmoid(x[i]);
  tape.record(out, {input}, [inp = input, o = out]() mutable {
    auto& dx = inp.grad();
    const auto& dy = o.grad();
    const auto& s = o.data();
    for (std::int64_t i = 0; i < inp.numel(); ++i) dx[i] += dy[i] * s[i] * (1.0 - s[i]);
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined() && a.shape() == b.shape(), "add: shape mismatch");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  tape.record(out, {a, b}, [ta = a, tb = b, o = out]() mutable {
    const auto& dy = o.grad();
    auto& da = ta.grad();
    auto& db = tb.grad();
    for (std::int64_t i = 0; i < o.numel(); ++i) {
      da[i] += dy[i];
      db[i] += dy[i];
    }
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined() && a.shape() == b.shape(), "mul: shape mismatch");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  tape.record(out, {a, b}, [ta = a, tb = b, o = out]() mutable {
    const auto& dy = o.grad();
    auto& da = ta.grad();
    auto& db = tb.grad();
    for (std::int64_t i = 0; i < o.numel(); ++i) {
      da[i] += dy[i] * tb.data()[i];
      db[i] += dy[i] * ta.data()[i];
    }
  });
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, double c) {
  require(a.defined(), "add_scalar: undefined input");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + c;
  tape.record(out, {a}, [ta = a, o = out]() mutable {
    auto& da = ta.grad();
    const auto& dy = o.grad();
    for (std::int64_t i = 0; i < o.numel(); ++i) da[i] += dy[i];
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  require(a.defined(), "scale: undefined input");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
  tape.record(out, {a}, [ta = a, o = out, c]() mutable {
    auto& da = ta.grad();
    const auto& dy = o.grad();
    for (std::int64_t i = 0; i < o.numel(); ++i) da[i] += dy[i] * c;
  });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& input, std::vector<int> shape) {
  require(input.defined(), "reshape: undefined input");
  if (shape_numel(shape) != input.numel()) {
    throw ShapeError("reshape: element count mismatch, " + shape_to_string(input.shape()) +
                     " -> " + shape_to_string(shape));
  }
  Tensor out = Tensor::from_data(std::move(shape), input.data());
  tape.record(out, {input}, [inp = input, o = out]() mutable {
    auto& dx = inp.grad();
    const auto& dy = o.grad();
    for (std::int64_t i = 0; i < inp.numel(); ++i) dx[i] += dy[i];
  });
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& input) {
  require(input.defined(), "sum_all: undefined input");
  double total = 0.0;
  for (double v : input.data()) total += v;
  Tensor out = Tensor::from_data({1}, {total});
  tape.record(out, {input}, [inp = input, o = out]() mutable {
    auto& dx = inp.grad();
    const double g = o.grad()[0];
    for (std::int64_t i = 0; i < inp.numel(); ++i) dx[i] += g;
  });
  return out;
}

Tensor pick(Tape& tape, const Tensor& input, int row, int col) {
  require(input.defined() && input.ndim() == 2, "pick: input must be 2-d");
  if (row < 0 || row >= input.dim(0) || col < 0 || col >= input.dim(1)) {
    throw ValueError("pick: index out of range");
  }
  const std::int64_t idx = static_cast<std::int64_t>(row) * input.dim(1) + col;
  Tensor out = Tensor::from_data({1}, {input.data()[idx]});
  tape.record(out, {input},
              [inp = input, o = out, idx]() mutable { inp.grad()[idx] += o.grad()[0]; });
  return out;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  require(logits.defined() && logits.ndim() == 2, "softmax_cross_entropy: logits must be [N,C]");
  const int N = logits.dim(0), C = logits.dim(1);
  if (static_cast<int>(labels.size()) != N) {
    throw ShapeError("softmax_cross_entropy: one label per row required");
  }
  for (int label : labels) {
    if (label < 0 || label >= C) throw ValueError("softmax_cross_entropy: label out of range");
  }

  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N) * C);
  const auto& x = logits.data();
  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const double* row = x.data() + static_cast<std::int64_t>(i) * C;
    double hi = row[0];
    for (int j = 1; j < C; ++j) hi = std::max(hi, row[j]);
    double denom = 0.0;
    for (int j = 0; j < C; ++j) denom += std::exp(row[j] - hi);
    const double lse = hi + std::log(denom);
    loss += lse - row[labels[i]];
    for (int j = 0; j < C; ++j) {
      (*probs)[static_cast<std::int64_t>(i) * C + j] = std::exp(row[j] - lse);
    }
  }
  Tensor out = Tensor::from_data({1}, {loss / N});
  debug_check_finite(out, "softmax_cross_entropy");

  tape.record(out, {logits}, [lg = logits, o = out, probs, labels, N, C]() mutable {
    auto& dx = lg.grad();
    const double g = o.grad()[0] / N;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < C; ++j) {
        const double onehot = (j == labels[i]) ? 1.0 : 0.0;
        dx[static_cast<std::int64_t>(i) * C + j] +=
            g * ((*probs)[static_cast<std::int64_t>(i) * C + j] - onehot);
      }
    }
  });
  return out;
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require(logits.defined() && logits.ndim() == 2, "softmax_rows: logits must be [N,C]");
  const int N = logits.dim(0), C = logits.dim(1);
  std::vector<double> p(static_cast<std::size_t>(N) * C);
  const auto& x = logits.data();
  for (int i = 0; i < N; ++i) {
    const double* row = x.data() + static_cast<std::int64_t>(i) * C;
    double hi = row[0];
    for (int j = 1; j < C; ++j) hi = std::max(hi, row[j]);
    double denom = 0.0;
    for (int j = 0; j < C; ++j) denom += std::exp(row[j] - hi);
    for (int j = 0; j < C; ++j) {
      p[static_cast<std::int64_t>(i) * C + j] = std::exp(row[j] - hi) / denom;
    }
  }
  return p;
}

}  // namespace phonation
