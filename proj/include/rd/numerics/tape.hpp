#pragma once

#include <functional>
#include <vector>

#include "rd/numerics/tensor.hpp"

namespace rd {

// Ordered record of backward closures for one forward trace. Ops push their
// backward step while a TapeScope is active; backward() replays them in exact
// reverse execution order. A tape may be consumed only once.
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  // Seeds root.grad with 1 and runs all recorded closures in reverse.
  void backward(Tensor& root);

  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

  // Active tape for the current thread, or nullptr when gradients are off.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

// RAII activation of a tape on the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace rd
