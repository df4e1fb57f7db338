#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ego/ops.hpp"
#include "ego/rng.hpp"

namespace testutil {

// Central finite-difference gradient check. Builds the scalar function twice
// per perturbed element and compares against the analytic tape gradient.
// Returns the worst mismatch measured as |analytic - fd| / max(1, |analytic|,
// |fd|).
template <typename BuildFn>
double gradient_check(std::vector<ego::Tensor<double>> inputs, BuildFn build,
                      double step = 1e-5) {
  using ego::Tape;
  using ego::Var;

  const auto eval = [&](const std::vector<ego::Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(ego::make_leaf(tape, x, false));
    return build(tape, leaves).scalar();
  };

  // analytic gradients
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& x : inputs) leaves.push_back(ego::make_leaf(tape, x, true));
  Var<double> loss = build(tape, leaves);
  tape.backward(loss.id);

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ego::Tensor<double>& analytic = tape.grad(leaves[i].id);
    for (std::int64_t e = 0; e < inputs[i].numel(); ++e) {
      auto xs = inputs;
      const double orig = xs[i][e];
      xs[i][e] = orig + step;
      const double fp = eval(xs);
      xs[i][e] = orig - step;
      const double fm = eval(xs);
      const double fd = (fp - fm) / (2.0 * step);
      const double a = analytic[e];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline ego::Tensor<double> random_tensor(std::vector<int> shape, ego::Rng& rng,
                                         double lo = -1.0, double hi = 1.0) {
  return ego::Tensor<double>::uniform(std::move(shape), rng, lo, hi);
}

// Direct nested-loop convolution; the independent oracle for conv2d.
inline ego::Tensor<double> conv2d_oracle(const ego::Tensor<double>& x,
                                         const ego::Tensor<double>& w,
                                         const ego::Tensor<double>& b, int stride,
                                         int pad) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(0), k = w.dim(2);
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  ego::Tensor<double> y({Cout, Ho, Wo});
  for (int co = 0; co < Cout; ++co)
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        double acc = b[co];
        for (int ci = 0; ci < C; ++ci)
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
              const int h = oh * stride - pad + ki;
              const int wj = ow * stride - pad + kj;
              if (h < 0 || h >= H || wj < 0 || wj >= W) continue;
              acc += x[(static_cast<std::int64_t>(ci) * H + h) * W + wj] *
                     w[((static_cast<std::int64_t>(co) * C + ci) * k + ki) * k + kj];
            }
        y[(static_cast<std::int64_t>(co) * Ho + oh) * Wo + ow] = acc;
      }
  return y;
}

// Sum-of-scattered-kernels transposed convolution; the oracle for deconv2d.
inline ego::Tensor<double> deconv2d_oracle(const ego::Tensor<double>& x,
                                           const ego::Tensor<double>& w,
                                           const ego::Tensor<double>& b, int stride,
                                           int pad) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(1), k = w.dim(2);
  const int Ho = (H - 1) * stride - 2 * pad + k;
  const int Wo = (W - 1) * stride - 2 * pad + k;
  ego::Tensor<double> y({Cout, Ho, Wo});
  for (int co = 0; co < Cout; ++co)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i)
      y[static_cast<std::int64_t>(co) * Ho * Wo + i] = b[co];
  for (int ci = 0; ci < Cin; ++ci)
    for (int ih = 0; ih < H; ++ih)
      for (int iw = 0; iw < W; ++iw) {
        const double v = x[(static_cast<std::int64_t>(ci) * H + ih) * W + iw];
        for (int co = 0; co < Cout; ++co)
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
              const int oh = ih * stride - pad + ki;
              const int ow = iw * stride - pad + kj;
              if (oh < 0 || oh >= Ho || ow < 0 || ow >= Wo) continue;
              y[(static_cast<std::int64_t>(co) * Ho + oh) * Wo + ow] +=
                  v * w[((static_cast<std::int64_t>(ci) * Cout + co) * k + ki) * k + kj];
            }
      }
  return y;
}

}  // namespace testutil
