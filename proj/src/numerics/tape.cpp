#include "rd/numerics/tape.hpp"

#include <stdexcept>

namespace rd {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(Tensor& root) {
  if (consumed_) throw std::runtime_error("Tape::backward called twice on the same tape");
  if (root.numel() != 1) throw ShapeError("Tape::backward: root must be a scalar");
  if (!root.requires_grad()) {
    throw std::runtime_error("Tape::backward: root does not require grad");
  }
  consumed_ = true;
  root.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

}  // namespace rd
