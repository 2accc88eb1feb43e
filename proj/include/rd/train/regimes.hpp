#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rd/data/masking.hpp"
#include "rd/data/vocab.hpp"
#include "rd/data/window.hpp"
#include "rd/distill/losses.hpp"
#include "rd/eval/head.hpp"
#include "rd/model/params.hpp"
#include "rd/train/adamw.hpp"
#include "rd/train/schedule.hpp"

namespace rd {

// Predicate over parameter names; true marks a parameter as tunable.
using FreezeSpec = std::function<bool(const std::string&)>;

// Appends the fixed-column metrics CSV:
// step,lr,mlm,att,hidden,align,out,embed,total,wall_ms
class MetricsLogger {
 public:
  // Empty path disables logging. When log_wall_ms is false the wall_ms
  // column is written as 0 so reruns are byte-identical.
  MetricsLogger(const std::string& path, bool log_wall_ms);
  ~MetricsLogger();

  void log(long long step, double lr, const LossReport& report, double wall_ms);

  static const char* header();

 private:
  std::string path_;
  bool log_wall_ms_ = true;
};

struct RunOptions {
  uint64_t seed = 0;
  int batch_size = 16;
  ScheduleConfig schedule;
  AdamWOptions optim;
  MaskingOptions masking;
  bool log_wall_ms = true;
  std::string metrics_path;     // per-step CSV, empty disables
  std::string checkpoint_path;  // saved at the end (or last good on divergence)
};

// Desk-scale defaults above; the full-scale reference pre-training profile.
RunOptions reference_pretrain_profile();

struct TrainLog {
  std::vector<LossReport> history;
  double ms_per_step = 0.0;
};

// Masked-LM pre-training of the fully-parameterized teacher. On a non-finite
// loss the last finite-loss parameters are written to checkpoint_path and
// DivergenceError is thrown.
TeacherModel pretrain_teacher(const std::vector<WindowedExample>& examples, int vocab_size,
                              const ModelConfig& cfg, const RunOptions& run,
                              TrainLog* log = nullptr);

// Layer-to-layer distillation of a recursive student against a frozen
// teacher.
RecursiveStudent distill_student(const TeacherModel& teacher, const ModelConfig& student_cfg,
                                 const LossWeights& weights, const LayerMap& map,
                                 const std::vector<WindowedExample>& examples,
                                 const RunOptions& run, TrainLog* log = nullptr);

struct TuneResult {
  TaskHead head;
  std::vector<double> loss_history;
  double ms_per_step = 0.0;
  std::int64_t tunable_count = 0;
  uint64_t frozen_checksum_before = 0;
  uint64_t frozen_checksum_after = 0;
};

// Supervised tuning of a student plus a fresh task head. tunable selects the
// trainable backbone subset; everything else is frozen for the duration and
// checksummed before/after.
TuneResult tune_student(RecursiveStudent& model, const TaskDataset& dataset,
                        const RunOptions& run, const FreezeSpec& tunable);

// All backbone parameters tunable.
TuneResult finetune(RecursiveStudent& model, const TaskDataset& dataset, const RunOptions& run);

// Only adapters (+ head) tunable; backbone must stay bitwise unchanged.
// Models without adapters are rejected unless inject_adapters adds randomly
// initialized ones first.
TuneResult adapter_tune(RecursiveStudent& model, const TaskDataset& dataset,
                        const RunOptions& run, bool inject_adapters = false);

}  // namespace rd
