#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ego/ops.hpp"
#include "ego/rng.hpp"

// Network layers: dense, conv2d, deconv2d, batchnorm, leaky ReLU, Xavier
// init. Convolutions run as im2col + Eigen GEMM; deconv2d is the exact
// adjoint of conv2d so <deconv(x), y> = <x, conv(y)> holds by construction.

namespace ego {
namespace detail {

struct ConvGeom {
  int C, H, W;        // "conv input" side
  int k, stride, pad;
  int Ho, Wo;         // "conv output" side
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename S>
void im2col(const S* x, const ConvGeom& g, S* cols) {
  const int span = g.Ho * g.Wo;
  for (int c = 0; c < g.C; ++c) {
    const S* xc = x + static_cast<std::int64_t>(c) * g.H * g.W;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        S* row = cols + static_cast<std::int64_t>((c * g.k + ki) * g.k + kj) * span;
        for (int oh = 0; oh < g.Ho; ++oh) {
          const int h = oh * g.stride - g.pad + ki;
          S* dst = row + oh * g.Wo;
          if (h < 0 || h >= g.H) {
            for (int ow = 0; ow < g.Wo; ++ow) dst[ow] = S(0);
            continue;
          }
          const S* src = xc + h * g.W;
          for (int ow = 0; ow < g.Wo; ++ow) {
            const int w = ow * g.stride - g.pad + kj;
            dst[ow] = (w >= 0 && w < g.W) ? src[w] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* cols, const ConvGeom& g, S* x) {
  const int span = g.Ho * g.Wo;
  for (int c = 0; c < g.C; ++c) {
    S* xc = x + static_cast<std::int64_t>(c) * g.H * g.W;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const S* row = cols + static_cast<std::int64_t>((c * g.k + ki) * g.k + kj) * span;
        for (int oh = 0; oh < g.Ho; ++oh) {
          const int h = oh * g.stride - g.pad + ki;
          if (h < 0 || h >= g.H) continue;
          const S* src = row + oh * g.Wo;
          S* dst = xc + h * g.W;
          for (int ow = 0; ow < g.Wo; ++ow) {
            const int w = ow * g.stride - g.pad + kj;
            if (w >= 0 && w < g.W) dst[w] += src[ow];
          }
        }
      }
    }
  }
}

// Normalize (C,H,W) / (B,C,H,W) handling: returns batch size and whether a
// batch dim was present.
inline std::pair<int, bool> batch_of(const std::vector<int>& shape, const char* op) {
  if (shape.size() == 4) return {shape[0], true};
  if (shape.size() == 3) return {1, false};
  throw DimensionError(std::string(op) + ": expected rank 3 or 4 input");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fully connected: y = W x + b, batched as Y = X W^T + b.
// ---------------------------------------------------------------------------
template <typename S>
Var<S> dense(Var<S> x, Var<S> weight, Var<S> bias) {
  const auto& xs = x.value().shape();
  const auto& ws = weight.value().shape();
  if (ws.size() != 2) throw DimensionError("dense: weight must be (m,n)");
  const int m = ws[0], n = ws[1];
  if (bias.value().numel() != m) throw DimensionError("dense: bias length mismatch");
  const bool batched = xs.size() == 2;
  const int B = batched ? xs[0] : 1;
  const int in_dim = batched ? xs[1] : static_cast<int>(x.value().numel());
  if (in_dim != n)
    throw DimensionError("dense: input dim " + std::to_string(in_dim) +
                         " does not match weight cols " + std::to_string(n));

  Tensor<S> out(batched ? std::vector<int>{B, m} : std::vector<int>{m});
  auto X = x.value().mat(B, n);
  auto W = weight.value().mat(m, n);
  auto Y = out.mat(B, m);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += bias.value().mat(1, m).row(0);

  int id = x.tape->emit(std::move(out), {x.id, weight.id, bias.id},
                        [B, m, n](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    auto G = t.grad(self).mat(B, m);
    auto X = t.value(in[0]).mat(B, n);
    auto W = t.value(in[1]).mat(m, n);
    detail::accum(t, in[0],
                  [&](Tensor<S>& gx) { gx.mat(B, n).noalias() += G * W; });
    detail::accum(t, in[1],
                  [&](Tensor<S>& gw) { gw.mat(m, n).noalias() += G.transpose() * X; });
    detail::accum(t, in[2],
                  [&](Tensor<S>& gb) { gb.mat(1, m) += G.colwise().sum(); });
  });
  return {x.tape, id};
}

// ---------------------------------------------------------------------------
// conv2d: input (B,C,H,W) or (C,H,W), weight (Cout,Cin,k,k), valid padding
// with explicit pad parameter. Output spatial dim: (H + 2 pad - k)/stride + 1.
// ---------------------------------------------------------------------------
template <typename S>
Var<S> conv2d(Var<S> x, Var<S> weight, Var<S> bias, int stride, int pad = 0) {
  const auto& xs = x.value().shape();
  const auto& ws = weight.value().shape();
  auto [B, batched] = detail::batch_of(xs, "conv2d");
  if (ws.size() != 4 || ws[2] != ws[3]) throw DimensionError("conv2d: weight must be (Cout,Cin,k,k)");
  const int C = xs[batched ? 1 : 0], H = xs[batched ? 2 : 1], W = xs[batched ? 3 : 2];
  const int Cout = ws[0], Cin = ws[1], k = ws[2];
  if (C != Cin) throw DimensionError("conv2d: input channels mismatch");
  if (stride < 1 || pad < 0) throw DimensionError("conv2d: bad stride/pad");
  if (H + 2 * pad < k || W + 2 * pad < k) throw DimensionError("conv2d: kernel larger than padded input");
  if (bias.value().numel() != Cout) throw DimensionError("conv2d: bias length mismatch");
  const int Ho = detail::conv_out_dim(H, k, stride, pad);
  const int Wo = detail::conv_out_dim(W, k, stride, pad);
  const detail::ConvGeom geom{C, H, W, k, stride, pad, Ho, Wo};

  Tensor<S> out(batched ? std::vector<int>{B, Cout, Ho, Wo}
                        : std::vector<int>{Cout, Ho, Wo});
  const int span = Ho * Wo;
  const int krows = C * k * k;
  Tensor<S> cols({krows, span});
  auto Wm = weight.value().mat(Cout, krows);
  auto bm = bias.value().mat(1, Cout);
  for (int b = 0; b < B; ++b) {
    detail::im2col(x.value().data() + static_cast<std::int64_t>(b) * C * H * W, geom, cols.data());
    MatrixMap<S> Y(out.data() + static_cast<std::int64_t>(b) * Cout * span, Cout, span);
    Y.noalias() = Wm * cols.mat(krows, span);
    Y.colwise() += bm.row(0).transpose();
  }

  int id = x.tape->emit(std::move(out), {x.id, weight.id, bias.id},
                        [B, Cout, krows, span, geom](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const int C = geom.C, H = geom.H, W = geom.W;
    auto Wm = t.value(in[1]).mat(Cout, krows);
    const bool need_x = t.requires_grad(in[0]);
    const bool need_w = t.requires_grad(in[1]);
    const bool need_b = t.requires_grad(in[2]);
    Tensor<S> cols({krows, span});
    for (int b = 0; b < B; ++b) {
      ConstMatrixMap<S> G(t.grad(self).data() + static_cast<std::int64_t>(b) * Cout * span,
                          Cout, span);
      if (need_w || need_x) {
        if (need_w) {
          detail::im2col(t.value(in[0]).data() + static_cast<std::int64_t>(b) * C * H * W,
                         geom, cols.data());
          t.grad(in[1]).mat(Cout, krows).noalias() += G * cols.mat(krows, span).transpose();
        }
        if (need_x) {
          cols.mat(krows, span).noalias() = Wm.transpose() * G;
          detail::col2im_add(cols.data(), geom,
                             t.grad(in[0]).data() + static_cast<std::int64_t>(b) * C * H * W);
        }
      }
      if (need_b) t.grad(in[2]).mat(1, Cout) += G.rowwise().sum().transpose();
    }
  });
  return {x.tape, id};
}

// ---------------------------------------------------------------------------
// deconv2d (transposed convolution): input (B,Cin,H,W), weight (Cin,Cout,k,k).
// Output spatial dim: (H-1) stride - 2 pad + k. Adjoint of conv2d.
// ---------------------------------------------------------------------------
template <typename S>
Var<S> deconv2d(Var<S> x, Var<S> weight, Var<S> bias, int stride, int pad = 0) {
  const auto& xs = x.value().shape();
  const auto& ws = weight.value().shape();
  auto [B, batched] = detail::batch_of(xs, "deconv2d");
  if (ws.size() != 4 || ws[2] != ws[3]) throw DimensionError("deconv2d: weight must be (Cin,Cout,k,k)");
  const int Cin = xs[batched ? 1 : 0], H = xs[batched ? 2 : 1], W = xs[batched ? 3 : 2];
  if (ws[0] != Cin) throw DimensionError("deconv2d: input channels mismatch");
  const int Cout = ws[1], k = ws[2];
  if (stride < 1 || pad < 0) throw DimensionError("deconv2d: bad stride/pad");
  const int Ho = (H - 1) * stride - 2 * pad + k;
  const int Wo = (W - 1) * stride - 2 * pad + k;
  if (Ho < 1 || Wo < 1) throw DimensionError("deconv2d: empty output");
  if (bias.value().numel() != Cout) throw DimensionError("deconv2d: bias length mismatch");
  // conv geometry with the deconv OUTPUT on the conv-input side
  const detail::ConvGeom geom{Cout, Ho, Wo, k, stride, pad, H, W};

  Tensor<S> out(batched ? std::vector<int>{B, Cout, Ho, Wo}
                        : std::vector<int>{Cout, Ho, Wo});
  const int krows = Cout * k * k;
  const int span = H * W;
  Tensor<S> cols({krows, span});
  auto Wm = weight.value().mat(Cin, krows);
  for (int b = 0; b < B; ++b) {
    ConstMatrixMap<S> X(x.value().data() + static_cast<std::int64_t>(b) * Cin * span, Cin, span);
    cols.mat(krows, span).noalias() = Wm.transpose() * X;
    S* dst = out.data() + static_cast<std::int64_t>(b) * Cout * Ho * Wo;
    detail::col2im_add(cols.data(), geom, dst);
    for (int c = 0; c < Cout; ++c)
      ArrayMap<S>(dst + static_cast<std::int64_t>(c) * Ho * Wo, Ho * Wo) += bias.value()[c];
  }

  int id = x.tape->emit(std::move(out), {x.id, weight.id, bias.id},
                        [B, Cin, Cout, krows, span, geom](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const int Ho = geom.H, Wo = geom.W;
    auto Wm = t.value(in[1]).mat(Cin, krows);
    Tensor<S> cols({krows, span});
    const bool need_x = t.requires_grad(in[0]);
    const bool need_w = t.requires_grad(in[1]);
    const bool need_b = t.requires_grad(in[2]);
    for (int b = 0; b < B; ++b) {
      const S* gsrc = t.grad(self).data() + static_cast<std::int64_t>(b) * Cout * Ho * Wo;
      if (need_x || need_w) {
        detail::im2col(gsrc, geom, cols.data());
        if (need_x) {
          MatrixMap<S> GX(t.grad(in[0]).data() + static_cast<std::int64_t>(b) * Cin * span,
                          Cin, span);
          GX.noalias() += Wm * cols.mat(krows, span);
        }
        if (need_w) {
          ConstMatrixMap<S> X(t.value(in[0]).data() + static_cast<std::int64_t>(b) * Cin * span,
                              Cin, span);
          t.grad(in[1]).mat(Cin, krows).noalias() += X * cols.mat(krows, span).transpose();
        }
      }
      if (need_b)
        for (int c = 0; c < Cout; ++c)
          t.grad(in[2])[c] +=
              ConstArrayMap<S>(gsrc + static_cast<std::int64_t>(c) * Ho * Wo, Ho * Wo).sum();
    }
  });
  return {x.tape, id};
}

// ---------------------------------------------------------------------------
// Leaky ReLU; derivative at exactly 0 is taken as 1.
// ---------------------------------------------------------------------------
template <typename S>
Var<S> leaky_relu(Var<S> x, S slope) {
  if (slope < S(0) || slope >= S(1)) throw DimensionError("leaky_relu: slope must be in [0,1)");
  Tensor<S> out(x.value().shape());
  out.flat() = x.value().flat().max(x.value().flat() * slope);
  int id = x.tape->emit(std::move(out), {x.id}, [slope](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& gx) {
      const Tensor<S>& xv = t.value(in[0]);
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        gx[i] += g[i] * (xv[i] >= S(0) ? S(1) : slope);
    });
  });
  return {x.tape, id};
}

// ---------------------------------------------------------------------------
// Batch normalization over the channel dim of (B,C) or (B,C,H,W) input.
// Running statistics live outside the tape and are updated in train mode.
// ---------------------------------------------------------------------------
template <typename S>
struct BatchNormState {
  Tensor<S> running_mean;
  Tensor<S> running_var;
  explicit BatchNormState(int channels)
      : running_mean({channels}), running_var(Tensor<S>::full({channels}, S(1))) {}
  BatchNormState() = default;
};

template <typename S>
Var<S> batchnorm(Var<S> x, Var<S> gamma, Var<S> beta, BatchNormState<S>* state,
                 bool train, S momentum = S(0.1), S eps = S(1e-5)) {
  const auto& xs = x.value().shape();
  if (xs.size() != 2 && xs.size() != 4) throw DimensionError("batchnorm: expected (B,C) or (B,C,H,W)");
  const int B = xs[0], C = xs[1];
  const int spatial = xs.size() == 4 ? xs[2] * xs[3] : 1;
  if (train && B < 2) throw DimensionError("batchnorm: train mode needs batch size >= 2");
  if (gamma.value().numel() != C || beta.value().numel() != C)
    throw DimensionError("batchnorm: gamma/beta length mismatch");
  if (!state || state->running_mean.numel() != C)
    throw DimensionError("batchnorm: state channel mismatch");

  const std::int64_t cstride = spatial;
  const std::int64_t bstride = static_cast<std::int64_t>(C) * spatial;
  const S n = static_cast<S>(B) * static_cast<S>(spatial);

  Tensor<S> mean_t({C}), istd_t({C});
  for (int c = 0; c < C; ++c) {
    S m, v;
    if (train) {
      S acc = 0, acc2 = 0;
      for (int b = 0; b < B; ++b) {
        ConstArrayMap<S> xc(x.value().data() + b * bstride + c * cstride, spatial);
        acc += xc.sum();
        acc2 += xc.square().sum();
      }
      m = acc / n;
      v = acc2 / n - m * m;
      if (v < S(0)) v = S(0);
      state->running_mean[c] = (S(1) - momentum) * state->running_mean[c] + momentum * m;
      state->running_var[c] = (S(1) - momentum) * state->running_var[c] + momentum * v;
    } else {
      m = state->running_mean[c];
      v = state->running_var[c];
    }
    mean_t[c] = m;
    istd_t[c] = S(1) / std::sqrt(v + eps);
  }

  Tensor<S> out(x.value().shape());
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      ConstArrayMap<S> xc(x.value().data() + b * bstride + c * cstride, spatial);
      ArrayMap<S> yc(out.data() + b * bstride + c * cstride, spatial);
      yc = (xc - mean_t[c]) * istd_t[c] * gamma.value()[c] + beta.value()[c];
    }

  int id = x.tape->emit(std::move(out), {x.id, gamma.id, beta.id},
                        [B, C, spatial, bstride, cstride, n, train,
                         mean = std::move(mean_t), istd = std::move(istd_t)](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    const Tensor<S>& xv = t.value(in[0]);
    const bool need_x = t.requires_grad(in[0]);
    const bool need_g = t.requires_grad(in[1]);
    const bool need_b = t.requires_grad(in[2]);
    for (int c = 0; c < C; ++c) {
      // reduce per channel: sum g and sum g*xhat
      S sum_g = 0, sum_gx = 0;
      for (int b = 0; b < B; ++b) {
        ConstArrayMap<S> gc(g.data() + b * bstride + c * cstride, spatial);
        ConstArrayMap<S> xc(xv.data() + b * bstride + c * cstride, spatial);
        sum_g += gc.sum();
        sum_gx += (gc * (xc - mean[c]) * istd[c]).sum();
      }
      if (need_g) t.grad(in[1])[c] += sum_gx;
      if (need_b) t.grad(in[2])[c] += sum_g;
      if (need_x) {
        const S gam = t.value(in[1])[c];
        for (int b = 0; b < B; ++b) {
          ConstArrayMap<S> gc(g.data() + b * bstride + c * cstride, spatial);
          ConstArrayMap<S> xc(xv.data() + b * bstride + c * cstride, spatial);
          ArrayMap<S> gx(t.grad(in[0]).data() + b * bstride + c * cstride, spatial);
          if (train) {
            gx += gam * istd[c] *
                  (gc - sum_g / n - (xc - mean[c]) * istd[c] * (sum_gx / n));
          } else {
            gx += gam * istd[c] * gc;
          }
        }
      }
    }
  });
  return {x.tape, id};
}

// ---------------------------------------------------------------------------
// Xavier (Glorot) uniform initialization, deterministic per seed.
// ---------------------------------------------------------------------------
inline std::pair<std::int64_t, std::int64_t> xavier_fans(const std::vector<int>& shape) {
  if (shape.size() == 2) return {shape[1], shape[0]};
  if (shape.size() == 4) {
    const std::int64_t rec = static_cast<std::int64_t>(shape[2]) * shape[3];
    return {shape[1] * rec, shape[0] * rec};
  }
  if (shape.size() == 1) return {shape[0], shape[0]};
  throw DimensionError("xavier_init: cannot derive fans from shape");
}

template <typename S>
Tensor<S> xavier_init(std::vector<int> shape, std::uint64_t seed) {
  auto [fan_in, fan_out] = xavier_fans(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng = Rng::stream(seed, "xavier");
  Tensor<S> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace ego
