#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ego/nn.hpp"
#include "ego/tape.hpp"

namespace ego {

enum class OptimizerKind { kAdam, kSgd };

// Named parameter set with per-parameter Adam moment buffers and batchnorm
// running statistics. Names are unique and shapes immutable after creation;
// the store is exclusively owned by its trainer.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> m;  // first moment
    Tensor<S> v;  // second moment
    bool has_grad = false;
    int tape_id = -1;
  };

  Tensor<S>& create(const std::string& name, Tensor<S> init) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw ConfigError("parameter already exists: " + name);
    Entry& e = it->second;
    e.value = std::move(init);
    e.grad = Tensor<S>(e.value.shape());
    e.m = Tensor<S>(e.value.shape());
    e.v = Tensor<S>(e.value.shape());
    return e.value;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Entry& entry(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  Tensor<S>& value(const std::string& name) { return entry(name).value; }
  const Tensor<S>& grad(const std::string& name) const { return entry(name).grad; }

  // Puts a parameter on the tape as a trainable leaf and remembers the node
  // so collect_grads() can pull its gradient after backward.
  Var<S> use(Tape<S>& tape, const std::string& name) {
    Entry& e = entry(name);
    Var<S> v = make_leaf(tape, e.value, true);
    e.tape_id = v.id;
    return v;
  }

  // Fixed (non-learnable this step) view of a parameter.
  Var<S> use_frozen(Tape<S>& tape, const std::string& name) {
    return make_constant(tape, entry(name).value);
  }

  BatchNormState<S>& bn_state(const std::string& name, int channels) {
    auto it = bn_.find(name);
    if (it == bn_.end()) it = bn_.emplace(name, BatchNormState<S>(channels)).first;
    if (it->second.running_mean.numel() != channels)
      throw DimensionError("batchnorm state channel mismatch for " + name);
    return it->second;
  }

  // Accumulates tape gradients into the store after backward().
  void collect_grads(Tape<S>& tape) {
    for (auto& [name, e] : params_) {
      if (e.tape_id < 0) continue;
      if (tape.has_grad(e.tape_id)) {
        e.grad.flat() += tape.grad(e.tape_id).flat();
        e.has_grad = true;
      }
      e.tape_id = -1;
    }
  }

  void zero_grads() {
    for (auto& [name, e] : params_) {
      e.grad.flat().setZero();
      e.has_grad = false;
    }
  }

  // One optimizer step over every parameter with a populated gradient;
  // gradients are zeroed afterwards. Parameters never placed on a tape since
  // the last step are an error.
  void step(S lr, OptimizerKind kind = OptimizerKind::kAdam, S beta1 = S(0.9),
            S beta2 = S(0.999), S eps = S(1e-8)) {
    for (auto& [name, e] : params_)
      if (!e.has_grad) throw NumericError("optimizer step with missing gradient: " + name);
    ++step_count_;
    if (kind == OptimizerKind::kAdam) {
      const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), step_count_));
      const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), step_count_));
      for (auto& [name, e] : params_) {
        e.m.flat() = beta1 * e.m.flat() + (S(1) - beta1) * e.grad.flat();
        e.v.flat() = beta2 * e.v.flat() + (S(1) - beta2) * e.grad.flat().square();
        e.value.flat() -= lr * (e.m.flat() / bc1) / ((e.v.flat() / bc2).sqrt() + eps);
      }
    } else {
      for (auto& [name, e] : params_) e.value.flat() -= lr * e.grad.flat();
    }
    zero_grads();
  }

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

  std::size_t size() const { return params_.size(); }
  std::int64_t total_elements() const {
    std::int64_t n = 0;
    for (const auto& [name, e] : params_) n += e.value.numel();
    return n;
  }

  const std::map<std::string, Entry>& entries() const { return params_; }
  std::map<std::string, Entry>& entries() { return params_; }
  const std::map<std::string, BatchNormState<S>>& bn_states() const { return bn_; }
  std::map<std::string, BatchNormState<S>>& bn_states() { return bn_; }

 private:
  std::map<std::string, Entry> params_;  // ordered: deterministic serialization
  std::map<std::string, BatchNormState<S>> bn_;
  std::int64_t step_count_ = 0;
};

}  // namespace ego
