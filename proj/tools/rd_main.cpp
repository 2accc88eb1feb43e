#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "rd/common/errors.hpp"
#include "rd/common/log.hpp"
#include "rd/data/masking.hpp"
#include "rd/data/vocab.hpp"
#include "rd/data/window.hpp"
#include "rd/distill/layer_map.hpp"
#include "rd/distill/losses.hpp"
#include "rd/eval/evaluate.hpp"
#include "rd/eval/synthetic.hpp"
#include "rd/model/checkpoint.hpp"
#include "rd/model/forward.hpp"
#include "rd/numerics/rng.hpp"
#include "rd/train/regimes.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitCorrupt = 4;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& section) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + key + "' in section '" + section + "'");
    }
  }
}

// Full run configuration shared by all subcommands; each command validates
// the subset it needs.
struct CliConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";
  int batch_size = 16;
  bool log_wall_ms = true;

  ModelConfig model;
  bool has_model = false;
  ScheduleConfig schedule;
  AdamWOptions optim;
  MaskingOptions masking;
  WindowOptions window;
  LossWeights weights;
  std::string layer_map = "identity";

  std::string corpus_path;
  std::string vocab_path;
  std::string dataset_path;
  std::string task = "classification";  // classification | tagging
  bool synthetic = false;
  int synthetic_examples = 256;
  int synthetic_seq_len = 12;
  uint64_t synthetic_seed = 1;

  std::string teacher_checkpoint;
  std::string checkpoint;
  std::string head_checkpoint;
};

ModelConfig parse_model(const json& j) {
  check_keys(j, {"hidden_dim", "num_heads", "ffn_dim", "num_layers", "vocab_size",
                 "max_positions", "embedding_rank", "adapter_bottleneck",
                 "adapter_nonlinearity", "dropout_prob", "use_token_type"},
             "model");
  ModelConfig cfg;
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.num_heads = j.value("num_heads", cfg.num_heads);
  cfg.ffn_dim = j.value("ffn_dim", cfg.ffn_dim);
  cfg.num_layers = j.value("num_layers", cfg.num_layers);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.max_positions = j.value("max_positions", cfg.max_positions);
  cfg.embedding_rank = j.value("embedding_rank", cfg.hidden_dim);
  cfg.adapter_bottleneck = j.value("adapter_bottleneck", cfg.adapter_bottleneck);
  if (j.contains("adapter_nonlinearity")) {
    cfg.adapter_nonlinearity =
        adapter_nonlinearity_from_string(j["adapter_nonlinearity"].get<std::string>());
  }
  cfg.dropout_prob = j.value("dropout_prob", cfg.dropout_prob);
  cfg.use_token_type = j.value("use_token_type", cfg.use_token_type);
  cfg.validate();
  return cfg;
}

CliConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "output_dir", "batch_size", "log_wall_ms", "model", "schedule",
                 "optimizer", "masking", "window", "weights", "layer_map", "data",
                 "teacher_checkpoint", "checkpoint", "head_checkpoint"},
             "(top level)");

  CliConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.log_wall_ms = j.value("log_wall_ms", cfg.log_wall_ms);
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");

  if (j.contains("model")) {
    cfg.model = parse_model(j["model"]);
    cfg.has_model = true;
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {"peak_lr", "warmup_steps", "total_steps"}, "schedule");
    cfg.schedule.peak_lr = s.value("peak_lr", cfg.schedule.peak_lr);
    cfg.schedule.warmup_steps = s.value("warmup_steps", cfg.schedule.warmup_steps);
    cfg.schedule.total_steps = s.value("total_steps", cfg.schedule.total_steps);
    cfg.schedule.validate();
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_keys(o, {"beta1", "beta2", "eps", "weight_decay", "clip_norm"}, "optimizer");
    cfg.optim.beta1 = o.value("beta1", cfg.optim.beta1);
    cfg.optim.beta2 = o.value("beta2", cfg.optim.beta2);
    cfg.optim.eps = o.value("eps", cfg.optim.eps);
    cfg.optim.weight_decay = o.value("weight_decay", cfg.optim.weight_decay);
    cfg.optim.clip_norm = o.value("clip_norm", cfg.optim.clip_norm);
  }
  if (j.contains("masking")) {
    const json& m = j["masking"];
    check_keys(m, {"p_mask", "mask_frac", "random_frac", "all_mask"}, "masking");
    cfg.masking.p_mask = m.value("p_mask", cfg.masking.p_mask);
    cfg.masking.mask_frac = m.value("mask_frac", cfg.masking.mask_frac);
    cfg.masking.random_frac = m.value("random_frac", cfg.masking.random_frac);
    cfg.masking.all_mask = m.value("all_mask", cfg.masking.all_mask);
    cfg.masking.validate();
  }
  if (j.contains("window")) {
    const json& w = j["window"];
    check_keys(w, {"window", "stride", "max_per_doc"}, "window");
    cfg.window.window = w.value("window", cfg.window.window);
    cfg.window.stride = w.value("stride", cfg.window.stride);
    cfg.window.max_per_doc = w.value("max_per_doc", cfg.window.max_per_doc);
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    check_keys(w, {"lambda_mlm", "lambda_align", "lambda_out", "alignment", "embed_loss",
                   "raw_sums", "mean_over_layers", "teacher_first_kl"},
               "weights");
    cfg.weights.lambda_mlm = w.value("lambda_mlm", cfg.weights.lambda_mlm);
    cfg.weights.lambda_align = w.value("lambda_align", cfg.weights.lambda_align);
    cfg.weights.lambda_out = w.value("lambda_out", cfg.weights.lambda_out);
    if (w.contains("alignment")) {
      cfg.weights.alignment_mode = alignment_mode_from_string(w["alignment"].get<std::string>());
    }
    cfg.weights.embed_loss_enabled = w.value("embed_loss", cfg.weights.embed_loss_enabled);
    cfg.weights.raw_sums = w.value("raw_sums", cfg.weights.raw_sums);
    cfg.weights.mean_over_layers = w.value("mean_over_layers", cfg.weights.mean_over_layers);
    cfg.weights.teacher_first_kl = w.value("teacher_first_kl", cfg.weights.teacher_first_kl);
  }
  if (j.contains("layer_map")) {
    cfg.layer_map = j["layer_map"].get<std::string>();
    (void)layer_map_strategy_from_string(cfg.layer_map);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"corpus", "vocab", "dataset", "task", "synthetic"}, "data");
    cfg.corpus_path = d.value("corpus", cfg.corpus_path);
    cfg.vocab_path = d.value("vocab", cfg.vocab_path);
    cfg.dataset_path = d.value("dataset", cfg.dataset_path);
    cfg.task = d.value("task", cfg.task);
    if (cfg.task != "classification" && cfg.task != "tagging") {
      throw ConfigError("data.task must be 'classification' or 'tagging'");
    }
    if (d.contains("synthetic")) {
      const json& s = d["synthetic"];
      check_keys(s, {"examples", "seq_len", "seed"}, "data.synthetic");
      cfg.synthetic = true;
      cfg.synthetic_examples = s.value("examples", cfg.synthetic_examples);
      cfg.synthetic_seq_len = s.value("seq_len", cfg.synthetic_seq_len);
      cfg.synthetic_seed = s.value("seed", cfg.synthetic_seed);
    }
  }
  cfg.teacher_checkpoint = j.value("teacher_checkpoint", cfg.teacher_checkpoint);
  cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
  cfg.head_checkpoint = j.value("head_checkpoint", cfg.head_checkpoint);

  if (const char* env = std::getenv("RD_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
    log_info("seed overridden by RD_SEED=" + std::string(env));
  }
  return cfg;
}

RunOptions to_run_options(const CliConfig& cfg) {
  RunOptions run;
  run.seed = cfg.seed;
  run.batch_size = cfg.batch_size;
  run.schedule = cfg.schedule;
  run.optim = cfg.optim;
  run.masking = cfg.masking;
  run.log_wall_ms = cfg.log_wall_ms;
  return run;
}

// Corpus -> vocabulary (built or loaded) + fixed-length windowed examples.
struct PreparedCorpus {
  Vocabulary vocab;
  std::vector<WindowedExample> examples;
};

PreparedCorpus prepare_corpus(const CliConfig& cfg, int vocab_size) {
  if (cfg.corpus_path.empty()) throw ConfigError("data.corpus is required for this command");
  auto docs = read_documents(cfg.corpus_path);
  if (docs.empty()) throw ConfigError("corpus is empty: " + cfg.corpus_path);
  PreparedCorpus out;
  out.vocab = cfg.vocab_path.empty() ? build_vocab(docs, vocab_size, TokenMode::kWord)
                                     : Vocabulary::load(cfg.vocab_path);
  if (out.vocab.size() > vocab_size) {
    throw ConfigError("vocabulary size " + std::to_string(out.vocab.size()) +
                      " exceeds model vocab_size " + std::to_string(vocab_size));
  }
  std::vector<std::vector<int>> encoded;
  for (const auto& d : docs) encoded.push_back(encode(tokenize(d, TokenMode::kWord), out.vocab));
  out.examples = window_corpus(encoded, cfg.window);
  return out;
}

TaskDataset prepare_dataset(const CliConfig& cfg, const Vocabulary& vocab, int vocab_size) {
  if (cfg.synthetic) {
    return cfg.task == "classification"
               ? synthetic_classification(cfg.synthetic_examples, vocab_size,
                                          cfg.synthetic_seq_len, cfg.synthetic_seed)
               : synthetic_tagging(cfg.synthetic_examples, vocab_size, cfg.synthetic_seq_len,
                                   cfg.synthetic_seed);
  }
  if (cfg.dataset_path.empty()) {
    throw ConfigError("data.dataset (or data.synthetic) is required for this command");
  }
  return cfg.task == "classification" ? load_classification_dataset(cfg.dataset_path, vocab)
                                      : load_tagging_dataset(cfg.dataset_path, vocab);
}

Vocabulary dataset_vocab(const CliConfig& cfg, int vocab_size) {
  if (!cfg.vocab_path.empty()) return Vocabulary::load(cfg.vocab_path);
  if (cfg.synthetic) {
    // Synthetic tasks use raw ids; a placeholder vocabulary is enough.
    std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (int i = Vocabulary::kNumReserved; i < vocab_size; ++i) {
      tokens.push_back("tok" + std::to_string(i));
    }
    return Vocabulary(std::move(tokens));
  }
  throw ConfigError("data.vocab is required for file-based datasets");
}

void save_head_checkpoint(const std::string& path, const TaskHead& head,
                          const ModelConfig& model_cfg) {
  save_checkpoint(path, "head", model_cfg, collect_params(head),
                  {{"head_kind", to_string(head.kind)},
                   {"num_labels", std::to_string(head.num_labels)}});
}

TaskHead load_head_checkpoint(const std::string& path, const ModelConfig& model_cfg) {
  CheckpointData data = load_checkpoint(path);
  if (data.kind != "head") {
    throw CorruptArtifactError("expected a head checkpoint, found kind=" + data.kind);
  }
  auto kind_it = data.extra.find("head_kind");
  auto labels_it = data.extra.find("num_labels");
  if (kind_it == data.extra.end() || labels_it == data.extra.end()) {
    throw CorruptArtifactError("head checkpoint missing head_kind/num_labels");
  }
  auto rng = make_rng(0, "head-load");
  TaskHead head = init_task_head(head_kind_from_string(kind_it->second),
                                 model_cfg.hidden_dim, std::stoi(labels_it->second), rng);
  for (auto& p : collect_params(head)) {
    auto it = data.tensors.find(p.name);
    if (it == data.tensors.end() || it->second.shape() != p.tensor.shape()) {
      throw CorruptArtifactError("head checkpoint missing or mismatched " + p.name);
    }
    Tensor dst = p.tensor;
    std::copy(it->second.data(), it->second.data() + it->second.numel(), dst.data());
  }
  return head;
}

void write_report(const fs::path& dir, const EvalReport& report,
                  const std::vector<std::string>& label_names) {
  std::ofstream csv(dir / "report.csv", std::ios::trunc);
  csv << report.to_csv();
  std::ofstream txt(dir / "report.txt", std::ios::trunc);
  txt << report.to_text(label_names);
  std::cout << report.to_text(label_names);
}

int cmd_pretrain_teacher(const CliConfig& cfg) {
  if (!cfg.has_model) throw ConfigError("config field 'model' is required");
  fs::create_directories(cfg.output_dir);
  PreparedCorpus corpus = prepare_corpus(cfg, cfg.model.vocab_size);
  corpus.vocab.save((fs::path(cfg.output_dir) / "vocab.txt").string());

  RunOptions run = to_run_options(cfg);
  run.metrics_path = (fs::path(cfg.output_dir) / "metrics.csv").string();
  run.checkpoint_path = (fs::path(cfg.output_dir) / "teacher.ckpt").string();
  TrainLog log;
  pretrain_teacher(corpus.examples, cfg.model.vocab_size, cfg.model, run, &log);
  std::cout << "pretrained teacher: " << run.checkpoint_path << " (" << log.history.size()
            << " steps, final mlm=" << log.history.back().mlm << ")\n";
  return kExitOk;
}

int cmd_distill(const CliConfig& cfg) {
  if (!cfg.has_model) throw ConfigError("config field 'model' (student) is required");
  if (cfg.teacher_checkpoint.empty()) {
    throw ConfigError("config field 'teacher_checkpoint' is required");
  }
  fs::create_directories(cfg.output_dir);
  TeacherModel teacher = teacher_from_checkpoint(load_checkpoint(cfg.teacher_checkpoint), false);
  PreparedCorpus corpus = prepare_corpus(cfg, cfg.model.vocab_size);
  LayerMap map = build_layer_map(cfg.model.num_layers, teacher.config.num_layers,
                                 layer_map_strategy_from_string(cfg.layer_map));

  RunOptions run = to_run_options(cfg);
  run.metrics_path = (fs::path(cfg.output_dir) / "metrics.csv").string();
  run.checkpoint_path = (fs::path(cfg.output_dir) / "student.ckpt").string();
  TrainLog log;
  distill_student(teacher, cfg.model, cfg.weights, map, corpus.examples, run, &log);
  std::cout << "distilled student: " << run.checkpoint_path << " (" << log.history.size()
            << " steps, final total=" << log.history.back().total << ")\n";
  return kExitOk;
}

int cmd_tune(const CliConfig& cfg, bool adapters_only, bool inject_adapters) {
  if (cfg.checkpoint.empty()) throw ConfigError("config field 'checkpoint' is required");
  fs::create_directories(cfg.output_dir);
  RecursiveStudent model = student_from_checkpoint(load_checkpoint(cfg.checkpoint), true);
  Vocabulary vocab = dataset_vocab(cfg, model.config.vocab_size);
  TaskDataset dataset = prepare_dataset(cfg, vocab, model.config.vocab_size);

  RunOptions run = to_run_options(cfg);
  TuneResult result = adapters_only ? adapter_tune(model, dataset, run, inject_adapters)
                                    : finetune(model, dataset, run);
  if (adapters_only && result.frozen_checksum_before != result.frozen_checksum_after) {
    // Contract violation: the frozen backbone moved.
    throw DivergenceError("adapter-tune: backbone parameters changed while frozen");
  }
  std::cout << (adapters_only ? "adapter-tune" : "finetune") << ": tunable parameters = "
            << result.tunable_count << ", ms/step = " << result.ms_per_step << "\n";
  if (adapters_only) {
    std::cout << "backbone checksum unchanged: " << std::hex << result.frozen_checksum_before
              << std::dec << "\n";
  }

  const fs::path dir(cfg.output_dir);
  save_checkpoint((dir / "tuned.ckpt").string(), model);
  save_head_checkpoint((dir / "head.ckpt").string(), result.head, model.config);
  EvalReport report = evaluate(model, result.head, dataset, cfg.batch_size);
  write_report(dir, report, dataset.label_names);
  return kExitOk;
}

int cmd_eval(const CliConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("config field 'checkpoint' is required");
  if (cfg.head_checkpoint.empty()) throw ConfigError("config field 'head_checkpoint' is required");
  fs::create_directories(cfg.output_dir);
  RecursiveStudent model = student_from_checkpoint(load_checkpoint(cfg.checkpoint), true);
  TaskHead head = load_head_checkpoint(cfg.head_checkpoint, model.config);
  Vocabulary vocab = dataset_vocab(cfg, model.config.vocab_size);
  TaskDataset dataset = prepare_dataset(cfg, vocab, model.config.vocab_size);
  EvalReport report = evaluate(model, head, dataset, cfg.batch_size);
  write_report(fs::path(cfg.output_dir), report, dataset.label_names);
  return kExitOk;
}

void print_param_breakdown(const std::vector<NamedParam>& params) {
  std::map<std::string, std::int64_t> groups;
  std::int64_t total = 0, tunable = 0;
  for (const auto& p : params) {
    std::string group = p.name.substr(0, p.name.find('.'));
    if (is_adapter_param(p.name)) group = "adapters";
    groups[group] += static_cast<std::int64_t>(p.tensor.numel());
    total += static_cast<std::int64_t>(p.tensor.numel());
    if (p.tensor.requires_grad()) tunable += static_cast<std::int64_t>(p.tensor.numel());
  }
  for (const auto& [group, count] : groups) {
    std::cout << "  " << group << ": " << count << "\n";
  }
  std::cout << "total: " << total << "\n"
            << "backbone (excl. mlm_head): " << count_backbone_parameters(params) << "\n"
            << "tunable: " << tunable << "\n";
}

int cmd_inspect(const std::string& checkpoint, bool show_params, const std::string& attn_sentence,
                const std::string& vocab_path, const std::string& output_dir) {
  CheckpointData data = load_checkpoint(checkpoint);
  std::vector<NamedParam> params;
  ForwardTrace trace;
  bool have_trace = false;

  std::optional<TeacherModel> teacher;
  std::optional<RecursiveStudent> student;
  if (data.kind == "teacher") {
    teacher = teacher_from_checkpoint(data, true);
    params = collect_params(*teacher);
  } else if (data.kind == "student") {
    student = student_from_checkpoint(data, true);
    params = collect_params(*student);
  } else {
    throw CorruptArtifactError("inspect supports teacher/student checkpoints, found kind=" +
                               data.kind);
  }

  std::cout << "kind: " << data.kind << "\n"
            << "layers: " << data.config.num_layers << ", hidden: " << data.config.hidden_dim
            << ", heads: " << data.config.num_heads << ", vocab: " << data.config.vocab_size
            << ", rank: " << data.config.embedding_rank
            << ", bottleneck: " << data.config.adapter_bottleneck << "\n";
  if (show_params) print_param_breakdown(params);

  if (!attn_sentence.empty()) {
    if (vocab_path.empty()) throw ConfigError("--attn requires --vocab");
    Vocabulary vocab = Vocabulary::load(vocab_path);
    std::vector<int> tokens = {Vocabulary::kCls};
    for (const auto& w : tokenize(attn_sentence, TokenMode::kWord)) tokens.push_back(vocab.id(w));
    tokens.push_back(Vocabulary::kSep);
    const int n = static_cast<int>(tokens.size());
    std::vector<uint8_t> valid(static_cast<std::size_t>(n), 1);
    trace = teacher ? teacher_forward(tokens, valid, 1, n, *teacher)
                    : student_forward(tokens, valid, 1, n, *student);
    have_trace = true;

    fs::create_directories(output_dir);
    for (std::size_t l = 0; l < trace.attention_maps.size(); ++l) {
      const Tensor& map = trace.attention_maps[l];
      for (int h = 0; h < map.dim(1); ++h) {
        const fs::path file = fs::path(output_dir) / ("attn_" + data.kind + "_L" +
                                                      std::to_string(l + 1) + "_H" +
                                                      std::to_string(h + 1) + ".csv");
        std::ofstream os(file, std::ios::trunc);
        for (int q = 0; q < n; ++q) {
          for (int k = 0; k < n; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", map.at({0, h, q, k}));
            os << (k ? "," : "") << buf;
          }
          os << "\n";
        }
      }
    }
    std::cout << "wrote " << trace.attention_maps.size() * static_cast<std::size_t>(
                                 trace.attention_maps[0].dim(1))
              << " attention files to " << output_dir << "\n";
  }
  (void)have_trace;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive-student distillation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string alignment_override;
  bool embed_loss_flag = false;
  bool inject_adapters = false;

  auto add_config_opt = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "JSON run configuration")->required();
  };

  CLI::App* pretrain = app.add_subcommand("pretrain-teacher", "Pre-train a teacher with MLM");
  add_config_opt(pretrain);

  CLI::App* distill = app.add_subcommand("distill", "Distill a recursive student");
  add_config_opt(distill);
  distill->add_option("--alignment", alignment_override,
                      "Override alignment mode: full|hidden|attention|none");
  distill->add_flag("--embed-loss", embed_loss_flag, "Enable the embedding alignment loss");

  CLI::App* finetune_cmd = app.add_subcommand("finetune", "Full fine-tuning on a task");
  add_config_opt(finetune_cmd);

  CLI::App* adapter_cmd = app.add_subcommand("adapter-tune", "Adapter-only tuning");
  add_config_opt(adapter_cmd);
  adapter_cmd->add_flag("--inject-adapters", inject_adapters,
                        "Add randomly initialized adapters to an adapterless model");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a tuned model");
  add_config_opt(eval_cmd);

  std::string inspect_checkpoint, attn_sentence, inspect_vocab, inspect_out = "out";
  bool show_params = false;
  CLI::App* inspect = app.add_subcommand("inspect", "Inspect a checkpoint");
  inspect->add_option("checkpoint", inspect_checkpoint, "Checkpoint path")->required();
  inspect->add_flag("--params", show_params, "Print the parameter budget breakdown");
  inspect->add_option("--attn", attn_sentence, "Dump attention maps for this sentence");
  inspect->add_option("--vocab", inspect_vocab, "Vocabulary file for --attn");
  inspect->add_option("--out", inspect_out, "Output directory for attention dumps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (inspect->parsed()) {
      return cmd_inspect(inspect_checkpoint, show_params, attn_sentence, inspect_vocab,
                         inspect_out);
    }
    CliConfig cfg = load_config(config_path);
    if (!alignment_override.empty()) {
      cfg.weights.alignment_mode = alignment_mode_from_string(alignment_override);
    }
    if (embed_loss_flag) cfg.weights.embed_loss_enabled = true;

    if (pretrain->parsed()) return cmd_pretrain_teacher(cfg);
    if (distill->parsed()) return cmd_distill(cfg);
    if (finetune_cmd->parsed()) return cmd_tune(cfg, false, false);
    if (adapter_cmd->parsed()) return cmd_tune(cfg, true, inject_adapters);
    if (eval_cmd->parsed()) return cmd_eval(cfg);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const CorruptArtifactError& e) {
    std::cerr << "corrupt artifact: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
