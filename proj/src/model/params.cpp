#include "rd/model/params.hpp"

#include <cstring>

#include "rd/common/errors.hpp"

namespace rd {

namespace {

Tensor init_weight(Shape shape, std::mt19937_64& rng) {
  return Tensor::randn(std::move(shape), rng, kInitStddev, true);
}

void push(std::vector<NamedParam>& out, const std::string& name, const Tensor& t) {
  if (t.defined()) out.push_back({name, t});
}

}  // namespace

EmbeddingParams EmbeddingParams::clone() const {
  EmbeddingParams c;
  c.e_low = e_low.clone();
  if (w_e.defined()) c.w_e = w_e.clone();
  c.positional = positional.clone();
  if (token_type.defined()) c.token_type = token_type.clone();
  c.ln_gain = ln_gain.clone();
  c.ln_bias = ln_bias.clone();
  return c;
}

TransformerBlockParams TransformerBlockParams::clone() const {
  TransformerBlockParams c;
  c.q_w = q_w.clone(); c.q_b = q_b.clone();
  c.k_w = k_w.clone(); c.k_b = k_b.clone();
  c.v_w = v_w.clone(); c.v_b = v_b.clone();
  c.o_w = o_w.clone(); c.o_b = o_b.clone();
  c.ffn1_w = ffn1_w.clone(); c.ffn1_b = ffn1_b.clone();
  c.ffn2_w = ffn2_w.clone(); c.ffn2_b = ffn2_b.clone();
  c.ln1_gain = ln1_gain.clone(); c.ln1_bias = ln1_bias.clone();
  c.ln2_gain = ln2_gain.clone(); c.ln2_bias = ln2_bias.clone();
  return c;
}

AdapterParams AdapterParams::clone() const {
  AdapterParams c;
  c.down_w = down_w.clone();
  c.down_b = down_b.clone();
  c.up_w = up_w.clone();
  c.up_b = up_b.clone();
  return c;
}

MlmHeadParams MlmHeadParams::clone() const {
  MlmHeadParams c;
  c.dense_w = dense_w.clone(); c.dense_b = dense_b.clone();
  c.ln_gain = ln_gain.clone(); c.ln_bias = ln_bias.clone();
  c.decoder_bias = decoder_bias.clone();
  return c;
}

EmbeddingParams init_embedding(const ModelConfig& cfg, std::mt19937_64& rng) {
  EmbeddingParams e;
  const int d = cfg.hidden_dim;
  e.e_low = init_weight({cfg.vocab_size, cfg.embedding_rank}, rng);
  if (cfg.factorized()) e.w_e = init_weight({cfg.embedding_rank, d}, rng);
  e.positional = init_weight({cfg.max_positions, d}, rng);
  if (cfg.use_token_type) e.token_type = init_weight({2, d}, rng);
  e.ln_gain = Tensor::full({d}, 1.0, true);
  e.ln_bias = Tensor::zeros({d}, true);
  return e;
}

TransformerBlockParams init_block(const ModelConfig& cfg, std::mt19937_64& rng) {
  TransformerBlockParams b;
  const int d = cfg.hidden_dim;
  const int f = cfg.ffn_dim;
  b.q_w = init_weight({d, d}, rng); b.q_b = Tensor::zeros({d}, true);
  b.k_w = init_weight({d, d}, rng); b.k_b = Tensor::zeros({d}, true);
  b.v_w = init_weight({d, d}, rng); b.v_b = Tensor::zeros({d}, true);
  b.o_w = init_weight({d, d}, rng); b.o_b = Tensor::zeros({d}, true);
  b.ffn1_w = init_weight({d, f}, rng); b.ffn1_b = Tensor::zeros({f}, true);
  b.ffn2_w = init_weight({f, d}, rng); b.ffn2_b = Tensor::zeros({d}, true);
  b.ln1_gain = Tensor::full({d}, 1.0, true); b.ln1_bias = Tensor::zeros({d}, true);
  b.ln2_gain = Tensor::full({d}, 1.0, true); b.ln2_bias = Tensor::zeros({d}, true);
  return b;
}

AdapterParams init_adapter(const ModelConfig& cfg, std::mt19937_64& rng) {
  AdapterParams a;
  const int d = cfg.hidden_dim;
  const int b = cfg.adapter_bottleneck;
  a.down_w = init_weight({d, b}, rng);
  a.down_b = Tensor::zeros({b}, true);
  // Zero up-projection makes the adapter an exact identity at init.
  a.up_w = Tensor::zeros({b, d}, true);
  a.up_b = Tensor::zeros({d}, true);
  return a;
}

MlmHeadParams init_mlm_head(const ModelConfig& cfg, std::mt19937_64& rng) {
  MlmHeadParams h;
  const int d = cfg.hidden_dim;
  h.dense_w = init_weight({d, d}, rng);
  h.dense_b = Tensor::zeros({d}, true);
  h.ln_gain = Tensor::full({d}, 1.0, true);
  h.ln_bias = Tensor::zeros({d}, true);
  h.decoder_bias = Tensor::zeros({cfg.vocab_size}, true);
  return h;
}

TeacherModel init_teacher(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  TeacherModel m;
  m.config = cfg;
  m.embedding = init_embedding(cfg, rng);
  m.layers.resize(static_cast<std::size_t>(cfg.num_layers));
  for (auto& layer : m.layers) {
    layer.block = init_block(cfg, rng);
    if (cfg.adapter_bottleneck > 0) {
      layer.adapters = AdapterPair{init_adapter(cfg, rng), init_adapter(cfg, rng)};
    }
  }
  m.mlm_head = init_mlm_head(cfg, rng);
  return m;
}

RecursiveStudent init_student(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  RecursiveStudent m;
  m.config = cfg;
  m.embedding = init_embedding(cfg, rng);
  m.block = init_block(cfg, rng);
  if (cfg.adapter_bottleneck > 0) {
    for (int i = 0; i < cfg.num_layers; ++i) {
      m.adapters.push_back(AdapterPair{init_adapter(cfg, rng), init_adapter(cfg, rng)});
    }
  }
  m.mlm_head = init_mlm_head(cfg, rng);
  return m;
}

std::vector<NamedParam> collect_params(const EmbeddingParams& e, const std::string& prefix) {
  std::vector<NamedParam> out;
  push(out, prefix + "e_low", e.e_low);
  push(out, prefix + "w_e", e.w_e);
  push(out, prefix + "positional", e.positional);
  push(out, prefix + "token_type", e.token_type);
  push(out, prefix + "ln_gain", e.ln_gain);
  push(out, prefix + "ln_bias", e.ln_bias);
  return out;
}

namespace {

void collect_block(std::vector<NamedParam>& out, const TransformerBlockParams& b,
                   const std::string& p) {
  push(out, p + "q_w", b.q_w); push(out, p + "q_b", b.q_b);
  push(out, p + "k_w", b.k_w); push(out, p + "k_b", b.k_b);
  push(out, p + "v_w", b.v_w); push(out, p + "v_b", b.v_b);
  push(out, p + "o_w", b.o_w); push(out, p + "o_b", b.o_b);
  push(out, p + "ffn1_w", b.ffn1_w); push(out, p + "ffn1_b", b.ffn1_b);
  push(out, p + "ffn2_w", b.ffn2_w); push(out, p + "ffn2_b", b.ffn2_b);
  push(out, p + "ln1_gain", b.ln1_gain); push(out, p + "ln1_bias", b.ln1_bias);
  push(out, p + "ln2_gain", b.ln2_gain); push(out, p + "ln2_bias", b.ln2_bias);
}

void collect_adapter(std::vector<NamedParam>& out, const AdapterParams& a, const std::string& p) {
  push(out, p + "down_w", a.down_w);
  push(out, p + "down_b", a.down_b);
  push(out, p + "up_w", a.up_w);
  push(out, p + "up_b", a.up_b);
}

void collect_head(std::vector<NamedParam>& out, const MlmHeadParams& h) {
  push(out, "mlm_head.dense_w", h.dense_w);
  push(out, "mlm_head.dense_b", h.dense_b);
  push(out, "mlm_head.ln_gain", h.ln_gain);
  push(out, "mlm_head.ln_bias", h.ln_bias);
  push(out, "mlm_head.decoder_bias", h.decoder_bias);
}

}  // namespace

std::vector<NamedParam> collect_params(const TeacherModel& m) {
  std::vector<NamedParam> out = collect_params(m.embedding, "embedding.");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    collect_block(out, m.layers[i].block, p + "block.");
    if (m.layers[i].adapters) {
      collect_adapter(out, m.layers[i].adapters->att, p + "adapter.att.");
      collect_adapter(out, m.layers[i].adapters->mlp, p + "adapter.mlp.");
    }
  }
  collect_head(out, m.mlm_head);
  return out;
}

std::vector<NamedParam> collect_params(const RecursiveStudent& m) {
  std::vector<NamedParam> out = collect_params(m.embedding, "embedding.");
  collect_block(out, m.block, "block.");
  for (std::size_t i = 0; i < m.adapters.size(); ++i) {
    const std::string p = "adapters." + std::to_string(i) + ".";
    collect_adapter(out, m.adapters[i].att, p + "att.");
    collect_adapter(out, m.adapters[i].mlp, p + "mlp.");
  }
  collect_head(out, m.mlm_head);
  return out;
}

bool is_mlm_head_param(const std::string& name) { return name.rfind("mlm_head.", 0) == 0; }

bool is_adapter_param(const std::string& name) {
  return name.rfind("adapters.", 0) == 0 || name.find(".adapter.") != std::string::npos;
}

std::int64_t count_parameters(const std::vector<NamedParam>& params,
                              const std::function<bool(const std::string&)>& filter) {
  std::int64_t total = 0;
  for (const auto& p : params) {
    if (!filter || filter(p.name)) total += static_cast<std::int64_t>(p.tensor.numel());
  }
  return total;
}

std::int64_t count_backbone_parameters(const std::vector<NamedParam>& params) {
  return count_parameters(params, [](const std::string& n) { return !is_mlm_head_param(n); });
}

int derive_adapter_bottleneck(int hidden_dim, int num_layers, std::int64_t min_params) {
  const std::int64_t d = hidden_dim;
  const std::int64_t two_l = 2LL * num_layers;
  for (int b = 1; b < hidden_dim; ++b) {
    const std::int64_t per_adapter = 2 * d * b + b + d;
    if (two_l * per_adapter >= min_params) return b;
  }
  throw ConfigError("adapter budget unreachable for given dims");
}

void set_requires_grad_all(const std::vector<NamedParam>& params, bool rg) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(rg);
  }
}

void zero_grad_all(const std::vector<NamedParam>& params) {
  for (const auto& p : params) p.tensor.zero_grad();
}

uint64_t params_checksum(const std::vector<NamedParam>& params) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    mix(p.tensor.data(), p.tensor.numel() * sizeof(double));
  }
  return h;
}

TeacherModel materialize_unrolled(const RecursiveStudent& student) {
  TeacherModel m;
  m.config = student.config;
  m.embedding = student.embedding.clone();
  m.layers.resize(static_cast<std::size_t>(student.config.num_layers));
  for (int i = 0; i < student.config.num_layers; ++i) {
    auto& layer = m.layers[static_cast<std::size_t>(i)];
    layer.block = student.block.clone();
    if (!student.adapters.empty()) {
      layer.adapters = student.adapters[static_cast<std::size_t>(i)].clone();
    }
  }
  m.mlm_head = student.mlm_head.clone();
  return m;
}

}  // namespace rd
