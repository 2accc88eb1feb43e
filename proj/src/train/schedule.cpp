#include "rd/train/schedule.hpp"

#include "rd/common/errors.hpp"

namespace rd {

void ScheduleConfig::validate() const {
  if (peak_lr < 0.0) throw ConfigError("peak_lr must be nonnegative");
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps > total_steps) {
    throw ConfigError("schedule requires 0 <= warmup_steps <= total_steps");
  }
}

double lr_at(long long step, const ScheduleConfig& schedule) {
  schedule.validate();
  if (step <= 0 && schedule.warmup_steps > 0) return 0.0;
  if (step >= schedule.total_steps) return 0.0;
  if (step < schedule.warmup_steps) {
    return schedule.peak_lr * static_cast<double>(step) / schedule.warmup_steps;
  }
  if (schedule.total_steps == schedule.warmup_steps) return schedule.peak_lr;
  return schedule.peak_lr * static_cast<double>(schedule.total_steps - step) /
         (schedule.total_steps - schedule.warmup_steps);
}

}  // namespace rd
