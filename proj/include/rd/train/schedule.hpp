#pragma once

namespace rd {

// Linear warmup from 0 to peak_lr over warmup_steps, then linear decay back
// to 0 at total_steps.
struct ScheduleConfig {
  double peak_lr = 1e-3;
  int warmup_steps = 50;
  int total_steps = 500;

  void validate() const;  // throws ConfigError
};

double lr_at(long long step, const ScheduleConfig& schedule);

}  // namespace rd
