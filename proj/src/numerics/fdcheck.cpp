#include "rd/numerics/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rd {

double finite_difference_check(const std::function<double()>& loss_fn,
                               const std::vector<Tensor>& params,
                               const FdCheckOptions& opts) {
  double max_rel = 0.0;
  std::mt19937_64 rng(opts.subsample_seed);
  for (const Tensor& p : params) {
    Tensor param = p;  // shallow copy, same storage
    if (!param.requires_grad()) continue;
    std::vector<std::size_t> coords(param.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
    }
    for (std::size_t c : coords) {
      const double orig = param.data()[c];
      param.data()[c] = orig + opts.h;
      const double f_plus = loss_fn();
      param.data()[c] = orig - opts.h;
      const double f_minus = loss_fn();
      param.data()[c] = orig;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw std::runtime_error("finite_difference_check: non-finite loss value");
      }
      const double numeric = (f_plus - f_minus) / (2.0 * opts.h);
      const double analytic = param.grad()[c];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
  }
  return max_rel;
}

}  // namespace rd
