// End-to-end acceptance checks. Each test case prints a single PASS/FAIL
// line for its criterion; the underlying CHECKs carry the diagnostics.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "rd/common/errors.hpp"
#include "rd/data/masking.hpp"
#include "rd/distill/layer_map.hpp"
#include "rd/distill/losses.hpp"
#include "rd/eval/evaluate.hpp"
#include "rd/eval/synthetic.hpp"
#include "rd/model/checkpoint.hpp"
#include "rd/model/forward.hpp"
#include "rd/numerics/fdcheck.hpp"
#include "rd/numerics/ops.hpp"
#include "rd/numerics/rng.hpp"
#include "rd/numerics/tape.hpp"
#include "rd/train/regimes.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rd;

namespace {

void verdict(int id, const char* name, bool ok) {
  std::printf("criterion %02d %-58s %s\n", id, name, ok ? "PASS" : "FAIL");
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion ", id, " (", name, ")");
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig make_config(int d, int H, int ffn, int L, int V, int r, int b,
                        int max_pos = 32) {
  ModelConfig cfg;
  cfg.hidden_dim = d;
  cfg.num_heads = H;
  cfg.ffn_dim = ffn;
  cfg.num_layers = L;
  cfg.vocab_size = V;
  cfg.max_positions = max_pos;
  cfg.embedding_rank = r;
  cfg.adapter_bottleneck = b;
  cfg.dropout_prob = 0.0;
  cfg.validate();
  return cfg;
}

std::vector<int> random_tokens(int batch, int seq, int vocab, uint64_t seed) {
  auto rng = make_rng(seed, "acc-tokens");
  std::uniform_int_distribution<int> dist(0, vocab - 1);
  std::vector<int> out(static_cast<std::size_t>(batch) * seq);
  for (int& t : out) t = dist(rng);
  return out;
}

std::vector<uint8_t> all_valid(int batch, int seq) {
  return std::vector<uint8_t>(static_cast<std::size_t>(batch) * seq, 1);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Deterministic toy corpus of fixed-length windows over non-reserved ids.
std::vector<WindowedExample> toy_examples(int count, int vocab_size, uint64_t seed) {
  std::vector<std::vector<int>> docs;
  auto rng = make_rng(seed, "acc-corpus");
  std::uniform_int_distribution<int> tok(Vocabulary::kNumReserved, vocab_size - 1);
  for (int d = 0; d < count; ++d) {
    std::vector<int> doc(10);
    for (int& t : doc) t = tok(rng);
    docs.push_back(std::move(doc));
  }
  WindowOptions w;
  w.window = 10;
  w.stride = 5;
  w.max_per_doc = 1;
  return window_corpus(docs, w);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const fs::path& dir, const std::string& args) {
  std::string cmd = "cd " + dir.string() + " && " + RD_CLI_PATH + " " + args +
                    " > _stdout.txt 2> _stderr.txt";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Shared CLI workspace: toy corpus + a 10-step teacher checkpoint.
const fs::path& cli_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "rd_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    static const char* kWords[] = {"alpha", "beta", "gamma", "delta", "eps", "zeta",
                                   "eta",   "thet", "iota",  "kappa", "lam", "mu"};
    std::ofstream os(d / "corpus.txt");
    unsigned state = 777;
    for (int doc = 0; doc < 40; ++doc) {
      for (int w = 0; w < 30; ++w) {
        state = state * 1664525u + 1013904223u;
        os << (w ? " " : "") << kWords[(state >> 16) % 12];
      }
      os << "\n";
    }
    os.close();
    json cfg = {{"seed", 3},
                {"output_dir", "t_out"},
                {"batch_size", 4},
                {"log_wall_ms", false},
                {"model",
                 {{"hidden_dim", 16}, {"num_heads", 2}, {"ffn_dim", 32}, {"num_layers", 2},
                  {"vocab_size", 30}, {"max_positions", 16}, {"embedding_rank", 8},
                  {"dropout_prob", 0.0}}},
                {"schedule", {{"peak_lr", 1e-3}, {"warmup_steps", 2}, {"total_steps", 10}}},
                {"window", {{"window", 10}, {"stride", 5}, {"max_per_doc", 2}}},
                {"data", {{"corpus", "corpus.txt"}}}};
    std::ofstream cf(d / "teacher.json");
    cf << cfg.dump(2);
    cf.close();
    REQUIRE(run_cli(d, "pretrain-teacher teacher.json") == 0);
    return d;
  }();
  return dir;
}

json cli_student_config(const std::string& out_dir) {
  json cfg = json::parse(slurp(cli_dir() / "teacher.json"));
  cfg["output_dir"] = out_dir;
  cfg["teacher_checkpoint"] = "t_out/teacher.ckpt";
  cfg["data"] = {{"corpus", "corpus.txt"}, {"vocab", "t_out/vocab.txt"}};
  cfg["layer_map"] = "identity";
  return cfg;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path) {
  std::ifstream is(path);
  std::string line;
  REQUIRE(static_cast<bool>(std::getline(is, line)));  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Teacher/student pair over the same dims plus one masked-LM batch.
struct Fixture {
  ModelConfig cfg;
  TeacherModel teacher;
  RecursiveStudent student;
  DistillBatch batch;
  LayerMap map;

  explicit Fixture(const ModelConfig& c, uint64_t seed = 1) : cfg(c) {
    auto trng = make_rng(seed, "acc-teacher");
    auto srng = make_rng(seed + 1, "acc-student");
    teacher = init_teacher(cfg, trng);
    student = init_student(cfg, srng);
    for (auto& pair : student.adapters) {
      auto arng = make_rng(seed + 2, "acc-adapter");
      pair.att.up_w = Tensor::randn(pair.att.up_w.shape(), arng, 0.05, true);
      pair.mlp.up_w = Tensor::randn(pair.mlp.up_w.shape(), arng, 0.05, true);
    }
    set_requires_grad_all(collect_params(teacher), false);

    batch.batch = 2;
    batch.seq = 6;
    batch.tokens = random_tokens(2, 6, cfg.vocab_size, seed + 3);
    batch.tokens[0] = Vocabulary::kCls;
    batch.tokens[6] = Vocabulary::kCls;
    batch.labels.assign(12, DistillBatch::kLabelNone);
    batch.mask.assign(12, 0);
    for (std::size_t pos : {2u, 4u, 8u}) {
      batch.labels[pos] = static_cast<int>(pos) + Vocabulary::kNumReserved;
      batch.mask[pos] = 1;
      batch.tokens[pos] = Vocabulary::kMask;
    }
    batch.valid.assign(12, 1);
    batch.valid[11] = 0;
    map = build_layer_map(cfg.num_layers, cfg.num_layers, LayerMapStrategy::kIdentity);
  }

  LossReport run(const LossWeights& w) const {
    ForwardTrace ts = teacher_forward(batch.tokens, batch.valid, batch.batch, batch.seq, teacher);
    ForwardTrace ss = student_forward(batch.tokens, batch.valid, batch.batch, batch.seq, student);
    return total_loss(batch, ss, ts, w, map);
  }
};

double mean_range(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += xs[i];
  return s / static_cast<double>(end - begin);
}

}  // namespace

TEST_CASE("criterion 1: gradient correctness by finite differences") {
  const auto t0 = std::chrono::steady_clock::now();
  Fixture fx(make_config(16, 2, 32, 3, 50, 8, 4));
  LossWeights w;
  w.embed_loss_enabled = true;

  ForwardTrace ts = teacher_forward(fx.batch.tokens, fx.batch.valid, fx.batch.batch,
                                    fx.batch.seq, fx.teacher);
  auto forward = [&] {
    ForwardTrace ss = student_forward(fx.batch.tokens, fx.batch.valid, fx.batch.batch,
                                      fx.batch.seq, fx.student);
    return total_loss(fx.batch, ss, ts, w, fx.map).total_tensor;
  };

  auto named = collect_params(fx.student);
  std::vector<Tensor> params;
  for (const auto& p : named) params.push_back(p.tensor);
  for (Tensor p : params) p.zero_grad();

  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = forward();
  }
  tape.backward(loss);

  FdCheckOptions opts;
  opts.h = 1e-5;
  opts.max_coords_per_param = 6;
  opts.subsample_seed = 11;
  const double err = finite_difference_check([&] { return forward().value(); }, params, opts);
  const double secs = seconds_since(t0);
  CHECK(err < 1e-4);
  CHECK(secs < 60.0);
  verdict(1, "finite-difference gradients on the full loss", err < 1e-4 && secs < 60.0);
}

TEST_CASE("criterion 2: unroll equivalence and tied-gradient law") {
  bool ok = true;
  for (int L : {1, 2, 4, 6}) {
    ModelConfig cfg = make_config(8, 2, 12, L, 20, 4, 2);
    auto rng = make_rng(20 + static_cast<uint64_t>(L), "acc-unroll");
    RecursiveStudent s = init_student(cfg, rng);
    for (auto& pair : s.adapters) {
      for (Tensor* t : {&pair.att.up_w, &pair.mlp.up_w}) {
        Tensor fresh = Tensor::randn(t->shape(), rng, 0.1);
        std::copy(fresh.data(), fresh.data() + fresh.numel(), t->data());
      }
    }
    TeacherModel unrolled = materialize_unrolled(s);

    // Forward agreement on 10 random batches.
    double max_fwd = 0.0;
    for (uint64_t b = 0; b < 10; ++b) {
      auto tokens = random_tokens(2, 5, 20, 100 * static_cast<uint64_t>(L) + b);
      auto valid = all_valid(2, 5);
      ForwardTrace ts = student_forward(tokens, valid, 2, 5, s);
      ForwardTrace tu = teacher_forward(tokens, valid, 2, 5, unrolled);
      max_fwd = std::max(max_fwd, max_abs_diff(ts.final_logits, tu.final_logits));
      REQUIRE(ts.hidden_states.size() == tu.hidden_states.size());
      for (std::size_t l = 0; l < ts.hidden_states.size(); ++l) {
        max_fwd = std::max(max_fwd, max_abs_diff(ts.hidden_states[l], tu.hidden_states[l]));
      }
    }
    CHECK(max_fwd < 1e-10);
    ok = ok && max_fwd < 1e-10;

    // Shared-block gradient equals the sum over unrolled copies.
    auto tokens = random_tokens(2, 5, 20, 500 + static_cast<uint64_t>(L));
    auto valid = all_valid(2, 5);
    auto sp = collect_params(s);
    auto up = collect_params(unrolled);
    Tensor weights = Tensor::randn(Shape{2, 5, 20}, rng, 1.0);
    auto run_backward = [&](auto&& forward_fn, const std::vector<NamedParam>& ps) {
      zero_grad_all(ps);
      Tape tape;
      Tensor loss;
      {
        TapeScope scope(tape);
        loss = sum_all(mul(forward_fn(), weights));
      }
      tape.backward(loss);
    };
    run_backward([&] { return student_forward(tokens, valid, 2, 5, s).final_logits; }, sp);
    run_backward([&] { return teacher_forward(tokens, valid, 2, 5, unrolled).final_logits; }, up);

    std::map<std::string, Tensor> by_name;
    for (auto& p : up) by_name.emplace(p.name, p.tensor);
    double max_rel = 0.0;
    for (auto& p : sp) {
      if (p.name.rfind("block.", 0) != 0) continue;
      const std::string suffix = p.name.substr(6);
      for (std::size_t c = 0; c < p.tensor.numel(); ++c) {
        double sum = 0.0;
        for (int l = 0; l < L; ++l) {
          sum += by_name.at("layers." + std::to_string(l) + ".block." + suffix).grad()[c];
        }
        const double mine = p.tensor.grad()[c];
        const double denom = std::max({std::abs(sum), std::abs(mine), 1e-8});
        max_rel = std::max(max_rel, std::abs(sum - mine) / denom);
      }
    }
    CHECK(max_rel < 1e-8);
    ok = ok && max_rel < 1e-8;
  }
  verdict(2, "unroll equivalence and tied-gradient sum law", ok);
}

TEST_CASE("criterion 3: zero-init adapters are a bitwise identity") {
  ModelConfig cfg = make_config(8, 2, 12, 3, 20, 8, 2);
  auto rng = make_rng(31, "acc-identity");
  RecursiveStudent with = init_student(cfg, rng);  // up_w starts at zero

  RecursiveStudent without;
  without.config = cfg;
  without.config.adapter_bottleneck = 0;
  without.embedding = with.embedding;
  without.block = with.block;
  without.mlm_head = with.mlm_head;

  auto tokens = random_tokens(2, 5, 20, 32);
  auto valid = all_valid(2, 5);
  ForwardTrace ta = student_forward(tokens, valid, 2, 5, with);
  ForwardTrace tb = student_forward(tokens, valid, 2, 5, without);
  bool ok = true;
  for (std::size_t l = 0; l < ta.hidden_states.size(); ++l) {
    ok = ok && std::memcmp(ta.hidden_states[l].data(), tb.hidden_states[l].data(),
                           ta.hidden_states[l].numel() * sizeof(double)) == 0;
  }
  ok = ok && std::memcmp(ta.final_logits.data(), tb.final_logits.data(),
                         ta.final_logits.numel() * sizeof(double)) == 0;
  verdict(3, "zero-init adapters leave the forward pass bit-exact", ok);
}

TEST_CASE("criterion 4: embedding factorization identity and shapes") {
  bool ok = true;

  // Full rank: the effective table is the stored table, bit for bit, and
  // multiplying by the identity reproduces it exactly.
  ModelConfig full = make_config(16, 2, 32, 2, 50, 16, 0);
  auto rng = make_rng(41, "acc-embed");
  EmbeddingParams e = init_embedding(full, rng);
  Tensor eff = effective_embedding(e, full);
  ok = ok && std::memcmp(eff.data(), e.e_low.data(), eff.numel() * sizeof(double)) == 0;
  Tensor via_identity = matmul(e.e_low, Tensor::identity(16));
  ok = ok && std::memcmp(via_identity.data(), e.e_low.data(),
                         via_identity.numel() * sizeof(double)) == 0;
  CHECK(ok);

  // Factorized shapes at several ranks against large hidden dims.
  for (int r : {8, 128, 312}) {
    ModelConfig cfg = make_config(768, 12, 64, 2, 100, r, 0, 4);
    auto rng2 = make_rng(42 + static_cast<uint64_t>(r), "acc-embed");
    EmbeddingParams ef = init_embedding(cfg, rng2);
    Tensor effective = effective_embedding(ef, cfg);
    const bool shapes = ef.e_low.shape() == Shape{100, r} && ef.w_e.shape() == Shape{r, 768} &&
                        effective.shape() == Shape{100, 768};
    CHECK(shapes);
    ok = ok && shapes;
  }
  verdict(4, "factorized embedding identity and shape laws", ok);
}

TEST_CASE("criterion 5: parameter budgets at reference dims") {
  auto within = [](std::int64_t actual, double target) {
    return std::abs(static_cast<double>(actual) - target) <= 0.05 * target;
  };
  bool ok = true;

  const int b = derive_adapter_bottleneck(768, 12);
  {
    ModelConfig cfg = make_config(768, 12, 3072, 12, 30522, 768, 0, 512);
    auto rng = make_rng(51, "acc-budget");
    RecursiveStudent s = init_student(cfg, rng);
    const std::int64_t backbone = count_backbone_parameters(collect_params(s));
    CHECK(within(backbone, 31e6));
    ok = ok && within(backbone, 31e6);
  }
  {
    ModelConfig cfg = make_config(768, 12, 3072, 12, 30522, 312, b, 512);
    auto rng = make_rng(52, "acc-budget");
    RecursiveStudent s = init_student(cfg, rng);
    auto params = collect_params(s);
    const std::int64_t backbone = count_backbone_parameters(params);
    const std::int64_t adapters = count_parameters(params, is_adapter_param);
    CHECK(within(backbone, 18e6));
    CHECK(within(adapters, 0.9e6));
    ok = ok && within(backbone, 18e6) && within(adapters, 0.9e6);
  }
  {
    ModelConfig cfg = make_config(768, 12, 3072, 12, 30522, 128, b, 512);
    auto rng = make_rng(53, "acc-budget");
    RecursiveStudent s = init_student(cfg, rng);
    const std::int64_t backbone = count_backbone_parameters(collect_params(s));
    CHECK(within(backbone, 12e6));
    ok = ok && within(backbone, 12e6);
  }
  verdict(5, "parameter budgets within 5% at reference dims", ok);
}

TEST_CASE("criterion 6: loss-term identities") {
  Fixture fx(make_config(8, 2, 16, 2, 20, 4, 2), 61);
  bool ok = true;

  // Self-distillation: identical traces zero the alignment and output terms.
  ForwardTrace t = teacher_forward(fx.batch.tokens, fx.batch.valid, fx.batch.batch,
                                   fx.batch.seq, fx.teacher);
  LossWeights w;
  LossReport self = total_loss(fx.batch, t, t, w, fx.map);
  ok = ok && std::abs(self.align) < 1e-12 && std::abs(self.out) < 1e-12;
  CHECK(std::abs(self.align) < 1e-12);
  CHECK(std::abs(self.out) < 1e-12);

  // Three-point linearity in each lambda.
  for (int which = 0; which < 3; ++which) {
    auto eval = [&](double lam) {
      LossWeights wl;
      (which == 0 ? wl.lambda_mlm : which == 1 ? wl.lambda_align : wl.lambda_out) = lam;
      return fx.run(wl).total;
    };
    const double t0 = eval(0.0), t1 = eval(1.0), t2 = eval(2.0);
    const bool linear = std::abs((t2 - t1) - (t1 - t0)) < 1e-9;
    CHECK(linear);
    ok = ok && linear;
  }

  // Embedding loss is off by default and zero for identical embeddings.
  LossWeights defaults;
  ok = ok && !defaults.embed_loss_enabled;
  LossWeights we;
  we.embed_loss_enabled = true;
  LossReport self_embed = total_loss(fx.batch, t, t, we, fx.map);
  CHECK(std::abs(self_embed.embed) < 1e-12);
  ok = ok && std::abs(self_embed.embed) < 1e-12;

  // The CLI alignment override zeroes the align CSV column.
  const fs::path& dir = cli_dir();
  std::ofstream cf(dir / "student_none.json");
  cf << cli_student_config("s_none").dump(2);
  cf.close();
  REQUIRE(run_cli(dir, "distill student_none.json --alignment none") == 0);
  auto rows = read_csv_rows(dir / "s_none/metrics.csv");
  REQUIRE(!rows.empty());
  for (const auto& row : rows) {
    CHECK(row[5] == 0.0);
    ok = ok && row[5] == 0.0;
  }
  verdict(6, "loss identities (fixpoint, linearity, overrides)", ok);
}

TEST_CASE("criterion 7: distillation smoke run improves alignment") {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg = make_config(32, 4, 64, 4, 30, 16, 0, 16);
  auto examples = toy_examples(160, cfg.vocab_size, 71);

  RunOptions pre;
  pre.seed = 7;
  pre.batch_size = 8;
  pre.schedule.peak_lr = 1e-3;
  pre.schedule.warmup_steps = 30;
  pre.schedule.total_steps = 300;
  pre.log_wall_ms = false;
  TeacherModel teacher = pretrain_teacher(examples, cfg.vocab_size, cfg, pre);

  RunOptions dist = pre;
  dist.seed = 8;
  dist.schedule.warmup_steps = 50;
  dist.schedule.total_steps = 500;
  LossWeights w;
  LayerMap map = build_layer_map(4, 4, LayerMapStrategy::kIdentity);
  TrainLog log;
  distill_student(teacher, cfg, w, map, examples, dist, &log);

  REQUIRE(log.history.size() == 500);
  std::vector<double> align, out;
  for (const auto& r : log.history) {
    align.push_back(r.align);
    out.push_back(r.out);
  }
  const double align_early = mean_range(align, 0, 100);
  const double align_late = mean_range(align, 400, 500);
  const double out_early = mean_range(out, 0, 100);
  const double out_late = mean_range(out, 400, 500);
  const double secs = seconds_since(t0);
  CHECK(align_late < align_early);
  CHECK(out_late < out_early);
  CHECK(secs < 600.0);
  std::printf("  align %0.4f -> %0.4f, out %0.4f -> %0.4f (%.1fs)\n", align_early, align_late,
              out_early, out_late, secs);
  verdict(7, "smoke run reduces alignment and output losses",
          align_late < align_early && out_late < out_early && secs < 600.0);
}

TEST_CASE("criterion 8: alignment ablation direction on 3-seed means") {
  ModelConfig cfg = make_config(16, 2, 32, 2, 30, 8, 0, 16);
  auto examples = toy_examples(120, cfg.vocab_size, 81);

  RunOptions pre;
  pre.seed = 4;
  pre.batch_size = 8;
  pre.schedule.peak_lr = 1e-3;
  pre.schedule.warmup_steps = 20;
  pre.schedule.total_steps = 200;
  pre.log_wall_ms = false;
  TeacherModel teacher = pretrain_teacher(examples, cfg.vocab_size, cfg, pre);

  TaskDataset heldout = synthetic_classification(512, cfg.vocab_size, 10, 999);
  const AlignmentMode modes[] = {AlignmentMode::kFull, AlignmentMode::kHiddenOnly,
                                 AlignmentMode::kAttentionOnly, AlignmentMode::kNone};
  double means[4] = {0, 0, 0, 0};
  for (int m = 0; m < 4; ++m) {
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      RunOptions dist = pre;
      dist.seed = seed;
      dist.schedule.total_steps = 120;
      LossWeights w;
      w.alignment_mode = modes[m];
      LayerMap map = build_layer_map(2, 2, LayerMapStrategy::kIdentity);
      RecursiveStudent student = distill_student(teacher, cfg, w, map, examples, dist);

      TaskDataset train = synthetic_classification(128, cfg.vocab_size, 10, 100 + seed);
      RunOptions tune;
      tune.seed = seed;
      tune.batch_size = 8;
      tune.schedule.peak_lr = 5e-3;
      tune.schedule.warmup_steps = 0;
      tune.schedule.total_steps = 120;
      tune.log_wall_ms = false;
      TuneResult result = finetune(student, train, tune);
      means[m] += evaluate(student, result.head, heldout, 32).accuracy / 3.0;
    }
  }
  std::printf("  accuracy means: full=%.4f hidden=%.4f attention=%.4f none=%.4f\n", means[0],
              means[1], means[2], means[3]);
  CHECK(means[0] >= means[3]);
  verdict(8, "full-alignment accuracy >= no-alignment (3-seed mean)", means[0] >= means[3]);
}

TEST_CASE("criterion 9: adapter-tuning contract") {
  ModelConfig cfg = make_config(16, 2, 32, 2, 30, 8, 4, 16);
  auto rng = make_rng(91, "acc-adapter");
  RecursiveStudent original = init_student(cfg, rng);
  const fs::path ckpt = fs::temp_directory_path() / "rd_acceptance_adapter.ckpt";
  save_checkpoint(ckpt.string(), original);
  RecursiveStudent for_adapter = student_from_checkpoint(load_checkpoint(ckpt.string()), true);
  RecursiveStudent for_full = student_from_checkpoint(load_checkpoint(ckpt.string()), true);
  fs::remove(ckpt);

  TaskDataset dataset = synthetic_classification(64, cfg.vocab_size, 10, 92);
  RunOptions run;
  run.seed = 9;
  run.batch_size = 8;
  run.schedule.peak_lr = 1e-3;
  run.schedule.warmup_steps = 0;
  run.schedule.total_steps = 200;
  run.log_wall_ms = false;

  TuneResult adapter = adapter_tune(for_adapter, dataset, run);
  TuneResult full = finetune(for_full, dataset, run);

  const bool frozen = adapter.frozen_checksum_before == adapter.frozen_checksum_after;
  auto params = collect_params(for_adapter);
  const std::int64_t expected = count_parameters(params, is_adapter_param) +
                                count_parameters(collect_params(adapter.head));
  const bool counted = adapter.tunable_count == expected;
  const bool faster = adapter.ms_per_step < full.ms_per_step;
  std::printf("  tunable %lld (expected %lld), %.3f ms/step vs %.3f full\n",
              static_cast<long long>(adapter.tunable_count), static_cast<long long>(expected),
              adapter.ms_per_step, full.ms_per_step);
  CHECK(frozen);
  CHECK(counted);
  CHECK(faster);
  verdict(9, "adapter tuning: frozen backbone, exact count, faster", frozen && counted && faster);
}

TEST_CASE("criterion 10: masking statistics and windowing cap") {
  bool ok = true;

  // ~1e5 maskable tokens at p = 0.15.
  MaskingOptions opts;
  auto rng = make_rng(101, "acc-mask");
  std::uniform_int_distribution<int> tok(Vocabulary::kNumReserved, 29);
  long long eligible = 0, masked = 0;
  bool special_touched = false;
  for (uint64_t row = 0; row < 1030; ++row) {
    std::vector<int> seq(100);
    seq.front() = Vocabulary::kCls;
    seq.back() = Vocabulary::kSep;
    for (std::size_t i = 1; i + 1 < seq.size(); ++i) seq[i] = tok(rng);
    MaskedRow m = apply_mlm_masking(seq, 30, opts, 17, row);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (Vocabulary::is_reserved(seq[i])) {
        special_touched = special_touched || m.mask[i] != 0 || m.tokens[i] != seq[i];
      } else {
        ++eligible;
        masked += m.mask[i] != 0;
      }
    }
  }
  const double fraction = static_cast<double>(masked) / static_cast<double>(eligible);
  CHECK(eligible >= 100000);
  CHECK(fraction >= 0.14);
  CHECK(fraction <= 0.16);
  CHECK(!special_touched);
  ok = ok && eligible >= 100000 && fraction >= 0.14 && fraction <= 0.16 && !special_touched;

  // A long document stops at the 10-window cap.
  std::vector<std::vector<int>> docs = {std::vector<int>(10 * 128 + 256, 7)};
  WindowOptions wo;  // window 128, stride 64, max_per_doc 10
  const auto windows = window_corpus(docs, wo);
  CHECK(windows.size() == 10);
  ok = ok && windows.size() == 10;
  verdict(10, "masking fraction, protected specials, window cap", ok);
}

TEST_CASE("criterion 11: determinism and bit-exact checkpoints") {
  bool ok = true;

  // Two CLI distillation runs with one seed agree byte for byte.
  const fs::path& dir = cli_dir();
  std::ofstream cf(dir / "student_det.json");
  cf << cli_student_config("s_det").dump(2);
  cf.close();
  REQUIRE(run_cli(dir, "distill student_det.json") == 0);
  const std::string csv1 = slurp(dir / "s_det/metrics.csv");
  const std::string ckpt1 = slurp(dir / "s_det/student.ckpt");
  REQUIRE(run_cli(dir, "distill student_det.json") == 0);
  ok = ok && csv1 == slurp(dir / "s_det/metrics.csv") && !csv1.empty();
  ok = ok && ckpt1 == slurp(dir / "s_det/student.ckpt");
  CHECK(ok);

  // Checkpoint round-trip reproduces the file bit for bit.
  ModelConfig cfg = make_config(8, 2, 16, 2, 20, 4, 2);
  auto rng = make_rng(111, "acc-det");
  RecursiveStudent s = init_student(cfg, rng);
  const fs::path p1 = fs::temp_directory_path() / "rd_acceptance_rt1.ckpt";
  const fs::path p2 = fs::temp_directory_path() / "rd_acceptance_rt2.ckpt";
  save_checkpoint(p1.string(), s);
  RecursiveStudent s2 = student_from_checkpoint(load_checkpoint(p1.string()), true);
  save_checkpoint(p2.string(), s2);
  const bool bitexact = slurp(p1) == slurp(p2) && !slurp(p1).empty();
  fs::remove(p1);
  fs::remove(p2);
  CHECK(bitexact);
  ok = ok && bitexact;
  verdict(11, "seeded reruns and checkpoint round-trips are bit-exact", ok);
}
