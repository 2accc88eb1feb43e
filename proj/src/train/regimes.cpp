#include "rd/train/regimes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rd/common/errors.hpp"
#include "rd/common/log.hpp"
#include "rd/model/checkpoint.hpp"
#include "rd/model/forward.hpp"
#include "rd/numerics/rng.hpp"
#include "rd/numerics/tape.hpp"

namespace rd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Deterministic epoch-shuffled index stream over the example pool.
class BatchSampler {
 public:
  BatchSampler(std::size_t pool, std::size_t batch, uint64_t seed)
      : pool_(pool), batch_(std::min(batch, pool)), seed_(seed) {
    if (pool_ == 0) throw ConfigError("training requires a non-empty example pool");
    indices_.resize(pool_);
    std::iota(indices_.begin(), indices_.end(), static_cast<std::size_t>(0));
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > pool_) reshuffle();
    std::vector<std::size_t> out(indices_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 indices_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

  uint64_t epoch() const { return epoch_; }

 private:
  void reshuffle() {
    auto rng = make_rng(seed_, "data-order", epoch_++);
    std::shuffle(indices_.begin(), indices_.end(), rng);
    cursor_ = 0;
  }

  std::size_t pool_, batch_, cursor_ = 0;
  uint64_t seed_, epoch_ = 0;
  std::vector<std::size_t> indices_;
};

// Masks the selected windowed examples into one batch. The masking stream is
// keyed by (epoch, corpus index) so each pass re-corrupts deterministically.
DistillBatch gather_batch(const std::vector<WindowedExample>& examples,
                          const std::vector<std::size_t>& indices, int vocab_size,
                          const MaskingOptions& masking, uint64_t mask_seed) {
  DistillBatch batch;
  batch.batch = static_cast<int>(indices.size());
  batch.seq = static_cast<int>(examples[indices[0]].tokens.size());
  for (std::size_t idx : indices) {
    const WindowedExample& ex = examples[idx];
    if (static_cast<int>(ex.tokens.size()) != batch.seq) {
      throw ConfigError("training pool has ragged example lengths");
    }
    MaskedRow row = apply_mlm_masking(ex.tokens, vocab_size, masking, mask_seed, idx);
    batch.tokens.insert(batch.tokens.end(), row.tokens.begin(), row.tokens.end());
    batch.labels.insert(batch.labels.end(), row.labels.begin(), row.labels.end());
    batch.mask.insert(batch.mask.end(), row.mask.begin(), row.mask.end());
    batch.valid.insert(batch.valid.end(), ex.valid.begin(), ex.valid.end());
  }
  return batch;
}

std::vector<Tensor> snapshot_params(const std::vector<NamedParam>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.clone());
  return out;
}

void restore_params(const std::vector<NamedParam>& params, const std::vector<Tensor>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor dst = params[i].tensor;  // shallow copy shares the value storage
    std::copy(snap[i].data(), snap[i].data() + snap[i].numel(), dst.data());
  }
}

}  // namespace

MetricsLogger::MetricsLogger(const std::string& path, bool log_wall_ms)
    : path_(path), log_wall_ms_(log_wall_ms) {
  if (path_.empty()) return;
  std::ofstream os(path_, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open metrics log: " + path_);
  os << header() << "\n";
}

MetricsLogger::~MetricsLogger() = default;

const char* MetricsLogger::header() {
  return "step,lr,mlm,att,hidden,align,out,embed,total,wall_ms";
}

void MetricsLogger::log(long long step, double lr, const LossReport& report, double wall_ms) {
  if (path_.empty()) return;
  std::ofstream os(path_, std::ios::app);
  os << step << "," << format_value(lr) << "," << format_value(report.mlm) << ","
     << format_value(report.att) << "," << format_value(report.hidden) << ","
     << format_value(report.align) << "," << format_value(report.out) << ","
     << format_value(report.embed) << "," << format_value(report.total) << ","
     << format_value(log_wall_ms_ ? wall_ms : 0.0) << "\n";
}

RunOptions reference_pretrain_profile() {
  RunOptions run;
  run.batch_size = 192;
  run.schedule.peak_lr = 5e-4;
  run.schedule.warmup_steps = 5000;
  run.schedule.total_steps = 100000;
  run.optim.weight_decay = 1e-4;
  return run;
}

TeacherModel pretrain_teacher(const std::vector<WindowedExample>& examples, int vocab_size,
                              const ModelConfig& cfg, const RunOptions& run, TrainLog* log) {
  cfg.validate();
  run.schedule.validate();
  if (vocab_size != cfg.vocab_size) {
    throw ConfigError("pretrain_teacher: vocabulary size does not match the model config");
  }

  auto init_rng = make_rng(run.seed, "teacher-init");
  TeacherModel model = init_teacher(cfg, init_rng);
  auto params = collect_params(model);
  AdamW opt(params, run.optim);
  MetricsLogger metrics(run.metrics_path, run.log_wall_ms);
  BatchSampler sampler(examples.size(), static_cast<std::size_t>(run.batch_size), run.seed);
  auto dropout_rng = make_rng(run.seed, "dropout");

  std::vector<Tensor> last_good = snapshot_params(params);
  double total_ms = 0.0;
  for (int step = 0; step < run.schedule.total_steps; ++step) {
    const auto t0 = Clock::now();
    const uint64_t mask_seed = derive_seed(run.seed, "mask-epoch", sampler.epoch());
    auto indices = sampler.next();
    DistillBatch batch = gather_batch(examples, indices, vocab_size, run.masking, mask_seed);

    ForwardOptions fopts;
    fopts.train = cfg.dropout_prob > 0.0;
    fopts.rng = &dropout_rng;

    opt.zero_grad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      ForwardTrace trace =
          teacher_forward(batch.tokens, batch.valid, batch.batch, batch.seq, model, fopts);
      loss = mlm_loss(trace.final_logits, batch.labels);
    }
    if (!std::isfinite(loss.value())) {
      restore_params(params, last_good);
      if (!run.checkpoint_path.empty()) save_checkpoint(run.checkpoint_path, model);
      throw DivergenceError("pretrain_teacher: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(loss);
    const double lr = lr_at(step, run.schedule);
    opt.step(lr);
    last_good = snapshot_params(params);

    LossReport report;
    report.mlm = loss.value();
    report.total = report.mlm;
    const double ms = ms_since(t0);
    total_ms += ms;
    metrics.log(step, lr, report, ms);
    if (log) log->history.push_back(report);
  }
  if (log && run.schedule.total_steps > 0) log->ms_per_step = total_ms / run.schedule.total_steps;
  if (!run.checkpoint_path.empty()) save_checkpoint(run.checkpoint_path, model);
  return model;
}

RecursiveStudent distill_student(const TeacherModel& teacher, const ModelConfig& student_cfg,
                                 const LossWeights& weights, const LayerMap& map,
                                 const std::vector<WindowedExample>& examples,
                                 const RunOptions& run, TrainLog* log) {
  student_cfg.validate();
  run.schedule.validate();
  map.validate();
  if (student_cfg.hidden_dim != teacher.config.hidden_dim ||
      student_cfg.num_heads != teacher.config.num_heads ||
      student_cfg.vocab_size != teacher.config.vocab_size) {
    throw ConfigError("distill_student: student and teacher dims are incompatible");
  }
  if (map.student_iterations != student_cfg.num_layers ||
      map.teacher_layers != teacher.config.num_layers) {
    throw ConfigError("distill_student: layer map does not match the model configs");
  }

  auto teacher_params = collect_params(teacher);
  set_requires_grad_all(teacher_params, false);

  auto init_rng = make_rng(run.seed, "student-init");
  RecursiveStudent student = init_student(student_cfg, init_rng);
  auto params = collect_params(student);
  AdamW opt(params, run.optim);
  MetricsLogger metrics(run.metrics_path, run.log_wall_ms);
  BatchSampler sampler(examples.size(), static_cast<std::size_t>(run.batch_size), run.seed);
  auto dropout_rng = make_rng(run.seed, "dropout");

  std::vector<Tensor> last_good = snapshot_params(params);
  double total_ms = 0.0;
  for (int step = 0; step < run.schedule.total_steps; ++step) {
    const auto t0 = Clock::now();
    const uint64_t mask_seed = derive_seed(run.seed, "mask-epoch", sampler.epoch());
    auto indices = sampler.next();
    DistillBatch batch =
        gather_batch(examples, indices, student_cfg.vocab_size, run.masking, mask_seed);

    ForwardOptions fopts;
    fopts.train = student_cfg.dropout_prob > 0.0;
    fopts.rng = &dropout_rng;

    // The teacher runs outside any tape: no graph, no gradients.
    ForwardTrace teacher_trace =
        teacher_forward(batch.tokens, batch.valid, batch.batch, batch.seq, teacher);

    opt.zero_grad();
    Tape tape;
    LossReport report;
    {
      TapeScope scope(tape);
      ForwardTrace student_trace =
          student_forward(batch.tokens, batch.valid, batch.batch, batch.seq, student, fopts);
      report = total_loss(batch, student_trace, teacher_trace, weights, map);
    }
    if (!std::isfinite(report.total)) {
      restore_params(params, last_good);
      if (!run.checkpoint_path.empty()) save_checkpoint(run.checkpoint_path, student);
      throw DivergenceError("distill_student: non-finite loss at step " + std::to_string(step));
    }
    Tensor root = report.total_tensor;
    tape.backward(root);
    const double lr = lr_at(step, run.schedule);
    opt.step(lr);
    last_good = snapshot_params(params);

    const double ms = ms_since(t0);
    total_ms += ms;
    metrics.log(step, lr, report, ms);
    if (log) log->history.push_back(report);
  }
  if (log && run.schedule.total_steps > 0) log->ms_per_step = total_ms / run.schedule.total_steps;
  if (!run.checkpoint_path.empty()) save_checkpoint(run.checkpoint_path, student);
  return student;
}

namespace {

struct TaskBatch {
  std::vector<int> tokens;
  std::vector<uint8_t> valid;
  std::vector<int> labels;       // per-example for sequence kind
  std::vector<int> token_tags;   // per-position for token kind, -1 excluded
  int batch = 0;
  int seq = 0;
};

TaskBatch gather_task_batch(const TaskDataset& dataset, const std::vector<std::size_t>& indices) {
  TaskBatch out;
  out.batch = static_cast<int>(indices.size());
  std::size_t max_len = 0;
  for (std::size_t idx : indices) {
    max_len = std::max(max_len, dataset.kind == HeadKind::kSequenceClassification
                                    ? dataset.classification[idx].tokens.size()
                                    : dataset.tagging[idx].tokens.size());
  }
  out.seq = static_cast<int>(max_len);
  for (std::size_t idx : indices) {
    const auto& tokens = dataset.kind == HeadKind::kSequenceClassification
                             ? dataset.classification[idx].tokens
                             : dataset.tagging[idx].tokens;
    const auto& valid = dataset.kind == HeadKind::kSequenceClassification
                            ? dataset.classification[idx].valid
                            : dataset.tagging[idx].valid;
    out.tokens.insert(out.tokens.end(), tokens.begin(), tokens.end());
    out.tokens.resize(out.tokens.size() + (max_len - tokens.size()), Vocabulary::kPad);
    out.valid.insert(out.valid.end(), valid.begin(), valid.end());
    out.valid.resize(out.valid.size() + (max_len - valid.size()), 0);
    if (dataset.kind == HeadKind::kSequenceClassification) {
      out.labels.push_back(dataset.classification[idx].label);
    } else {
      const auto& tags = dataset.tagging[idx].tags;
      out.token_tags.insert(out.token_tags.end(), tags.begin(), tags.end());
      out.token_tags.resize(out.token_tags.size() + (max_len - tags.size()), -1);
    }
  }
  return out;
}

}  // namespace

TuneResult tune_student(RecursiveStudent& model, const TaskDataset& dataset,
                        const RunOptions& run, const FreezeSpec& tunable) {
  run.schedule.validate();
  if (dataset.size() == 0) throw ConfigError("tune_student: empty dataset");
  if (dataset.num_labels < 2) throw ConfigError("tune_student: needs at least 2 labels");

  auto params = collect_params(model);
  std::vector<NamedParam> frozen, live;
  for (const auto& p : params) {
    (tunable(p.name) ? live : frozen).push_back(p);
  }
  set_requires_grad_all(frozen, false);
  set_requires_grad_all(live, true);

  TuneResult result;
  auto head_rng = make_rng(run.seed, "head-init");
  result.head = init_task_head(dataset.kind == HeadKind::kSequenceClassification
                                   ? HeadKind::kSequenceClassification
                                   : HeadKind::kTokenClassification,
                               model.config.hidden_dim, dataset.num_labels, head_rng);
  auto head_params = collect_params(result.head);
  std::vector<NamedParam> opt_params = live;
  opt_params.insert(opt_params.end(), head_params.begin(), head_params.end());
  result.tunable_count = count_parameters(opt_params);
  result.frozen_checksum_before = params_checksum(frozen);

  AdamW opt(opt_params, run.optim);
  BatchSampler sampler(dataset.size(), static_cast<std::size_t>(run.batch_size), run.seed);
  auto dropout_rng = make_rng(run.seed, "dropout");

  double total_ms = 0.0;
  for (int step = 0; step < run.schedule.total_steps; ++step) {
    const auto t0 = Clock::now();
    TaskBatch batch = gather_task_batch(dataset, sampler.next());

    ForwardOptions fopts;
    fopts.train = true;
    fopts.rng = &dropout_rng;

    opt.zero_grad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      ForwardTrace trace =
          student_forward(batch.tokens, batch.valid, batch.batch, batch.seq, model, fopts);
      Tensor logits = head_forward(trace, result.head, fopts);
      loss = dataset.kind == HeadKind::kSequenceClassification
                 ? sequence_classification_loss(logits, batch.labels)
                 : mlm_loss(logits, batch.token_tags);
    }
    if (!std::isfinite(loss.value())) {
      throw DivergenceError("tune_student: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(loss);
    opt.step(lr_at(step, run.schedule));
    total_ms += ms_since(t0);
    result.loss_history.push_back(loss.value());
  }
  if (run.schedule.total_steps > 0) result.ms_per_step = total_ms / run.schedule.total_steps;
  result.frozen_checksum_after = params_checksum(frozen);
  // Leave the model fully tunable again for subsequent use.
  set_requires_grad_all(frozen, true);
  return result;
}

TuneResult finetune(RecursiveStudent& model, const TaskDataset& dataset, const RunOptions& run) {
  return tune_student(model, dataset, run, [](const std::string&) { return true; });
}

TuneResult adapter_tune(RecursiveStudent& model, const TaskDataset& dataset,
                        const RunOptions& run, bool inject_adapters) {
  if (model.adapters.empty()) {
    if (!inject_adapters) {
      throw ConfigError(
          "adapter_tune: model has no adapters; pass --inject-adapters to add random ones");
    }
    if (model.config.adapter_bottleneck <= 0) {
      model.config.adapter_bottleneck =
          derive_adapter_bottleneck(model.config.hidden_dim, model.config.num_layers);
      log_info("adapter_tune: derived bottleneck width " +
               std::to_string(model.config.adapter_bottleneck));
    }
    auto rng = make_rng(run.seed, "adapter-inject");
    for (int l = 0; l < model.config.num_layers; ++l) {
      model.adapters.push_back(
          {init_adapter(model.config, rng), init_adapter(model.config, rng)});
    }
    // Injected adapters start from random projections rather than the usual
    // zero-up identity init.
    for (auto& pair : model.adapters) {
      pair.att.up_w = Tensor::randn(pair.att.up_w.shape(), rng, kInitStddev, true);
      pair.mlp.up_w = Tensor::randn(pair.mlp.up_w.shape(), rng, kInitStddev, true);
    }
  }
  return tune_student(model, dataset, run, is_adapter_param);
}

}  // namespace rd
