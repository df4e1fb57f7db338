#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ego/tape.hpp"

// Differentiable tensor operations. Each op appends one node to the tape;
// backward closures read inputs through the tape rather than capturing
// tensor copies, so memory stays proportional to the forward values.

namespace ego {
namespace detail {

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         Tensor<S>::shape_str(a.shape()) + " vs " +
                         Tensor<S>::shape_str(b.shape()));
}

// Gradient accumulation guarded by requires_grad of the target input.
template <typename S, typename Fn>
void accum(Tape<S>& t, int input_id, Fn&& fn) {
  if (!t.requires_grad(input_id)) return;
  fn(t.grad(input_id));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "add");
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() + b.value().flat();
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat(); });
    detail::accum(t, in[1], [&](Tensor<S>& gb) { gb.flat() += g.flat(); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "sub");
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() - b.value().flat();
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat(); });
    detail::accum(t, in[1], [&](Tensor<S>& gb) { gb.flat() -= g.flat(); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "mul");
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() * b.value().flat();
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0],
                  [&](Tensor<S>& ga) { ga.flat() += g.flat() * t.value(in[1]).flat(); });
    detail::accum(t, in[1],
                  [&](Tensor<S>& gb) { gb.flat() += g.flat() * t.value(in[0]).flat(); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> div(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "div");
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() / b.value().flat();
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    auto av = t.value(in[0]).flat();
    auto bv = t.value(in[1]).flat();
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat() / bv; });
    detail::accum(t, in[1],
                  [&](Tensor<S>& gb) { gb.flat() -= g.flat() * av / (bv * bv); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> neg(Var<S> a) {
  Tensor<S> out(a.value().shape());
  out.flat() = -a.value().flat();
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() -= g.flat(); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> add_scalar(Var<S> a, S c) {
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() + c;
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat(); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> mul_scalar(Var<S> a, S c) {
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat() * c;
  int id = a.tape->emit(std::move(out), {a.id}, [c](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat() * c; });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> square(Var<S> a) {
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat().square();
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga.flat() += g.flat() * S(2) * t.value(in[0]).flat();
    });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> sqrt_op(Var<S> a) {
  if ((a.value().flat() < S(0)).any()) throw NumericError("sqrt of negative value");
  Tensor<S> out(a.value().shape());
  out.flat() = a.value().flat().sqrt();
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga.flat() += g.flat() / (S(2) * t.value(self).flat());
    });
  });
  return {a.tape, id};
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename S>
Var<S> sum(Var<S> a) {
  Tensor<S> out = Tensor<S>::scalar(a.value().flat().sum());
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const S g = t.grad(self)[0];
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g; });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> mean(Var<S> a) {
  const S n = static_cast<S>(a.value().numel());
  Tensor<S> out = Tensor<S>::scalar(a.value().flat().sum() / n);
  int id = a.tape->emit(std::move(out), {a.id}, [n](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const S g = t.grad(self)[0];
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g / n; });
  });
  return {a.tape, id};
}

// Mean squared error over all elements; symmetric in its arguments.
template <typename S>
Var<S> mse(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "mse");
  const S n = static_cast<S>(a.value().numel());
  Tensor<S> out = Tensor<S>::scalar((a.value().flat() - b.value().flat()).square().sum() / n);
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [n](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const S g = t.grad(self)[0];
    auto diff = (t.value(in[0]).flat() - t.value(in[1]).flat()).eval();
    detail::accum(t, in[0],
                  [&](Tensor<S>& ga) { ga.flat() += diff * (S(2) * g / n); });
    detail::accum(t, in[1],
                  [&](Tensor<S>& gb) { gb.flat() -= diff * (S(2) * g / n); });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> dot(Var<S> a, Var<S> b) {
  detail::check_same_shape(a.value(), b.value(), "dot");
  Tensor<S> out = Tensor<S>::scalar((a.value().flat() * b.value().flat()).sum());
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const S g = t.grad(self)[0];
    detail::accum(t, in[0],
                  [&](Tensor<S>& ga) { ga.flat() += g * t.value(in[1]).flat(); });
    detail::accum(t, in[1],
                  [&](Tensor<S>& gb) { gb.flat() += g * t.value(in[0]).flat(); });
  });
  return {a.tape, id};
}

// Euclidean norm with an optional epsilon inside the root. eps = 0 gives the
// exact norm with the zero-input subgradient defined as 0.
template <typename S>
Var<S> norm(Var<S> a, S eps = S(0)) {
  const S sq = (a.value().flat().square()).sum() + eps;
  Tensor<S> out = Tensor<S>::scalar(std::sqrt(sq));
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const S g = t.grad(self)[0];
    const S n = t.value(self)[0];
    if (n == S(0)) return;  // subgradient 0 at the origin
    detail::accum(t, in[0],
                  [&](Tensor<S>& ga) { ga.flat() += (g / n) * t.value(in[0]).flat(); });
  });
  return {a.tape, id};
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

template <typename S>
Var<S> reshape(Var<S> a, std::vector<int> shape) {
  Tensor<S> out = a.value().reshaped(std::move(shape));
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) { ga.flat() += g.flat(); });
  });
  return {a.tape, id};
}

// Contiguous slice of the flattened tensor; result is 1-D of length len.
template <typename S>
Var<S> slice(Var<S> a, int start, int len) {
  if (start < 0 || len <= 0 || start + len > a.value().numel())
    throw DimensionError("slice out of range");
  Tensor<S> out({len});
  out.flat() = a.value().flat().segment(start, len);
  int id = a.tape->emit(std::move(out), {a.id}, [start, len](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga.flat().segment(start, len) += g.flat();
    });
  });
  return {a.tape, id};
}

// Concatenate flattened parts into a 1-D tensor.
template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Tape<S>* tape = parts[0].tape;
  std::int64_t total = 0;
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const auto& p : parts) {
    total += p.value().numel();
    ids.push_back(p.id);
  }
  Tensor<S> out({static_cast<int>(total)});
  std::int64_t off = 0;
  for (const auto& p : parts) {
    out.flat().segment(off, p.value().numel()) = p.value().flat();
    off += p.value().numel();
  }
  int id = tape->emit(std::move(out), std::move(ids), [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    std::int64_t off = 0;
    for (int input : in) {
      const std::int64_t n = t.value(input).numel();
      detail::accum(t, input, [&](Tensor<S>& gi) { gi.flat() += g.flat().segment(off, n); });
      off += n;
    }
  });
  return {tape, id};
}

// Value pass-through that blocks gradient flow.
template <typename S>
Var<S> detach(Var<S> a) {
  return make_constant(*a.tape, a.value());
}

// Normalizes every consecutive row_len-tuple to unit length (stabilized by
// eps inside the root). Used for quaternion output rows.
template <typename S>
Var<S> normalize_rows(Var<S> a, int row_len, S eps = S(1e-12)) {
  if (a.value().numel() % row_len != 0)
    throw DimensionError("normalize_rows: length not divisible by row size");
  const std::int64_t rows = a.value().numel() / row_len;
  Tensor<S> out(a.value().shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    auto seg = a.value().flat().segment(r * row_len, row_len);
    out.flat().segment(r * row_len, row_len) = seg / std::sqrt(seg.square().sum() + eps);
  }
  int id = a.tape->emit(std::move(out), {a.id}, [row_len, eps](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      const Tensor<S>& x = t.value(in[0]);
      const std::int64_t rows = x.numel() / row_len;
      for (std::int64_t r = 0; r < rows; ++r) {
        auto xs = x.flat().segment(r * row_len, row_len);
        auto gs = g.flat().segment(r * row_len, row_len);
        const S n2 = xs.square().sum() + eps;
        const S n = std::sqrt(n2);
        const S gd = (gs * xs).sum();
        ga.flat().segment(r * row_len, row_len) += gs / n - xs * (gd / (n2 * n));
      }
    });
  });
  return {a.tape, id};
}

// Elementwise sign as a constant (non-differentiable) node.
template <typename S>
Var<S> sign_const(Var<S> a) {
  Tensor<S> out(a.value().shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = a.value()[i] >= S(0) ? S(1) : S(-1);
  return make_constant(*a.tape, std::move(out));
}

// ---------------------------------------------------------------------------
// Scalar-tensor combinations
// ---------------------------------------------------------------------------

// Tensor divided by a scalar node.
template <typename S>
Var<S> vsdiv(Var<S> v, Var<S> s) {
  if (s.value().numel() != 1) throw DimensionError("vsdiv denominator must be scalar");
  Tensor<S> out(v.value().shape());
  const S sv = s.value()[0];
  out.flat() = v.value().flat() / sv;
  int id = v.tape->emit(std::move(out), {v.id, s.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    const S sv = t.value(in[1])[0];
    detail::accum(t, in[0], [&](Tensor<S>& gv) { gv.flat() += g.flat() / sv; });
    detail::accum(t, in[1], [&](Tensor<S>& gs) {
      gs[0] -= (g.flat() * t.value(in[0]).flat()).sum() / (sv * sv);
    });
  });
  return {v.tape, id};
}

// Scalar node times tensor.
template <typename S>
Var<S> smul(Var<S> s, Var<S> v) {
  if (s.value().numel() != 1) throw DimensionError("smul scale must be scalar");
  Tensor<S> out(v.value().shape());
  out.flat() = v.value().flat() * s.value()[0];
  int id = v.tape->emit(std::move(out), {v.id, s.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    const S sv = t.value(in[1])[0];
    detail::accum(t, in[0], [&](Tensor<S>& gv) { gv.flat() += g.flat() * sv; });
    detail::accum(t, in[1], [&](Tensor<S>& gs) {
      gs[0] += (g.flat() * t.value(in[0]).flat()).sum();
    });
  });
  return {v.tape, id};
}

// ---------------------------------------------------------------------------
// Small geometric ops (3-vectors, quaternions as (w,x,y,z) 4-vectors)
// ---------------------------------------------------------------------------

template <typename S>
Var<S> cross3(Var<S> a, Var<S> b) {
  if (a.value().numel() != 3 || b.value().numel() != 3)
    throw DimensionError("cross3 expects 3-vectors");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor<S> out({3});
  out[0] = av[1] * bv[2] - av[2] * bv[1];
  out[1] = av[2] * bv[0] - av[0] * bv[2];
  out[2] = av[0] * bv[1] - av[1] * bv[0];
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    const auto& av = t.value(in[0]);
    const auto& bv = t.value(in[1]);
    // d<g, a x b> / da = b x g ; / db = g x a
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga[0] += bv[1] * g[2] - bv[2] * g[1];
      ga[1] += bv[2] * g[0] - bv[0] * g[2];
      ga[2] += bv[0] * g[1] - bv[1] * g[0];
    });
    detail::accum(t, in[1], [&](Tensor<S>& gb) {
      gb[0] += g[1] * av[2] - g[2] * av[1];
      gb[1] += g[2] * av[0] - g[0] * av[2];
      gb[2] += g[0] * av[1] - g[1] * av[0];
    });
  });
  return {a.tape, id};
}

namespace detail {

template <typename S>
inline void hamilton(const S* a, const S* b, S* c) {
  c[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
  c[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2];
  c[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1];
  c[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0];
}

}  // namespace detail

// Hamilton product of two quaternions stored as (w,x,y,z).
template <typename S>
Var<S> quat_mul_op(Var<S> a, Var<S> b) {
  if (a.value().numel() != 4 || b.value().numel() != 4)
    throw DimensionError("quat_mul expects 4-vectors");
  Tensor<S> out({4});
  detail::hamilton(a.value().data(), b.value().data(), out.data());
  int id = a.tape->emit(std::move(out), {a.id, b.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    const auto& a = t.value(in[0]);
    const auto& b = t.value(in[1]);
    // c = a (x) b is bilinear; accumulate g through both linear maps.
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga[0] += g[0] * b[0] + g[1] * b[1] + g[2] * b[2] + g[3] * b[3];
      ga[1] += -g[0] * b[1] + g[1] * b[0] - g[2] * b[3] + g[3] * b[2];
      ga[2] += -g[0] * b[2] + g[1] * b[3] + g[2] * b[0] - g[3] * b[1];
      ga[3] += -g[0] * b[3] - g[1] * b[2] + g[2] * b[1] + g[3] * b[0];
    });
    detail::accum(t, in[1], [&](Tensor<S>& gb) {
      gb[0] += g[0] * a[0] + g[1] * a[1] + g[2] * a[2] + g[3] * a[3];
      gb[1] += -g[0] * a[1] + g[1] * a[0] + g[2] * a[3] - g[3] * a[2];
      gb[2] += -g[0] * a[2] - g[1] * a[3] + g[2] * a[0] + g[3] * a[1];
      gb[3] += -g[0] * a[3] + g[1] * a[2] - g[2] * a[1] + g[3] * a[0];
    });
  });
  return {a.tape, id};
}

template <typename S>
Var<S> quat_conj_op(Var<S> a) {
  if (a.value().numel() != 4) throw DimensionError("quat_conj expects a 4-vector");
  Tensor<S> out({4});
  out[0] = a.value()[0];
  out[1] = -a.value()[1];
  out[2] = -a.value()[2];
  out[3] = -a.value()[3];
  int id = a.tape->emit(std::move(out), {a.id}, [](Tape<S>& t, int self) {
    const auto& in = t.inputs(self);
    const Tensor<S>& g = t.grad(self);
    detail::accum(t, in[0], [&](Tensor<S>& ga) {
      ga[0] += g[0];
      ga[1] -= g[1];
      ga[2] -= g[2];
      ga[3] -= g[3];
    });
  });
  return {a.tape, id};
}

// Rotate a 3-vector by a unit quaternion: q (x) (0,v) (x) q*.
template <typename S>
Var<S> quat_rotate(Var<S> q, Var<S> v) {
  Var<S> zero = make_constant(*q.tape, Tensor<S>({1}));
  Var<S> pure = concat<S>({zero, v});
  Var<S> rotated = quat_mul_op(quat_mul_op(q, pure), quat_conj_op(q));
  return slice(rotated, 1, 3);
}

template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) { return add(a, b); }
template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) { return sub(a, b); }
template <typename S>
Var<S> operator*(Var<S> a, Var<S> b) { return mul(a, b); }
template <typename S>
Var<S> operator/(Var<S> a, Var<S> b) { return div(a, b); }
template <typename S>
Var<S> operator*(S c, Var<S> a) { return mul_scalar(a, c); }
template <typename S>
Var<S> operator-(Var<S> a) { return neg(a); }

}  // namespace ego
