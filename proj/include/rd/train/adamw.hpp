#pragma once

#include <vector>

#include "rd/model/params.hpp"

namespace rd {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 1.0;
};

// AdamW with decoupled weight decay. Parameters whose requires_grad flag is
// off are skipped entirely, so frozen weights stay bitwise unchanged.
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWOptions opts = {});

  // One update at learning rate lr. Returns false (and leaves parameters,
  // moments, and the step counter untouched) when any tracked gradient is
  // non-finite.
  bool step(double lr);

  void zero_grad();
  long long step_count() const { return step_; }
  const AdamWOptions& options() const { return opts_; }

 private:
  struct Slot {
    NamedParam param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  AdamWOptions opts_;
  long long step_ = 0;
};

}  // namespace rd
