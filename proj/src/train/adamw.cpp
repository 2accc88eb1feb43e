#include "rd/train/adamw.hpp"

#include <cmath>

#include "rd/common/errors.hpp"
#include "rd/common/log.hpp"

namespace rd {

AdamW::AdamW(std::vector<NamedParam> params, AdamWOptions opts) : opts_(opts) {
  if (opts_.beta1 < 0.0 || opts_.beta1 >= 1.0 || opts_.beta2 < 0.0 || opts_.beta2 >= 1.0 ||
      opts_.eps <= 0.0 || opts_.weight_decay < 0.0 || opts_.clip_norm < 0.0) {
    throw ConfigError("invalid AdamW hyperparameters");
  }
  for (auto& p : params) {
    Slot slot;
    slot.param = std::move(p);
    slot.m.assign(slot.param.tensor.numel(), 0.0);
    slot.v.assign(slot.param.tensor.numel(), 0.0);
    slots_.push_back(std::move(slot));
  }
}

bool AdamW::step(double lr) {
  if (lr < 0.0) throw ConfigError("negative learning rate");

  // First pass: gradient health and global norm over tracked parameters.
  double sq_norm = 0.0;
  for (const Slot& s : slots_) {
    if (!s.param.tensor.requires_grad()) continue;
    const double* g = s.param.tensor.grad();
    for (std::size_t i = 0; i < s.param.tensor.numel(); ++i) {
      if (!std::isfinite(g[i])) {
        log_warn("adamw: non-finite gradient in " + s.param.name + ", skipping step");
        return false;
      }
      sq_norm += g[i] * g[i];
    }
  }
  double clip_scale = 1.0;
  if (opts_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > opts_.clip_norm) clip_scale = opts_.clip_norm / norm;
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  for (Slot& s : slots_) {
    if (!s.param.tensor.requires_grad()) continue;
    double* w = s.param.tensor.data();
    const double* g = s.param.tensor.grad();
    for (std::size_t i = 0; i < s.param.tensor.numel(); ++i) {
      const double gi = g[i] * clip_scale;
      s.m[i] = opts_.beta1 * s.m[i] + (1.0 - opts_.beta1) * gi;
      s.v[i] = opts_.beta2 * s.v[i] + (1.0 - opts_.beta2) * gi * gi;
      const double m_hat = s.m[i] / bc1;
      const double v_hat = s.v[i] / bc2;
      // Decoupled decay acts on the weight directly, not through the moments.
      w[i] -= lr * (m_hat / (std::sqrt(v_hat) + opts_.eps) + opts_.weight_decay * w[i]);
    }
  }
  return true;
}

void AdamW::zero_grad() {
  for (Slot& s : slots_) s.param.tensor.zero_grad();
}

}  // namespace rd
