#pragma once

#include <functional>
#include <vector>

#include "rd/numerics/tensor.hpp"

namespace rd {

struct FdCheckOptions {
  double h = 1e-5;
  // 0 means check every coordinate; otherwise a deterministic subsample.
  std::size_t max_coords_per_param = 0;
  uint64_t subsample_seed = 0;
};

// Central-difference gradient verification. `loss_fn` must re-evaluate the
// loss from the current parameter values with gradients off; `params` must
// already hold analytic gradients from one backward pass. Returns the max
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const std::function<double()>& loss_fn,
                               const std::vector<Tensor>& params,
                               const FdCheckOptions& opts = {});

}  // namespace rd
