#include "rd/model/forward.hpp"

#include <cmath>

#include "rd/common/errors.hpp"
#include "rd/numerics/ops.hpp"

namespace rd {

namespace {

std::mt19937_64& dropout_rng(const ForwardOptions& opts) {
  if (!opts.rng) throw std::invalid_argument("train-mode forward needs an rng for dropout");
  return *opts.rng;
}

Tensor maybe_dropout(const Tensor& x, const ModelConfig& cfg, const ForwardOptions& opts) {
  if (!opts.train || cfg.dropout_prob == 0.0) return x;
  return dropout(x, cfg.dropout_prob, dropout_rng(opts), true);
}

}  // namespace

Tensor effective_embedding(const EmbeddingParams& e, const ModelConfig& cfg) {
  if (!cfg.factorized()) return e.e_low;
  return matmul(e.e_low, e.w_e);
}

Tensor embed(const std::vector<int>& tokens, int batch, int seq, const EmbeddingParams& e,
             const ModelConfig& cfg, const ForwardOptions& opts) {
  if (seq > cfg.max_positions) {
    throw ConfigError("sequence length " + std::to_string(seq) + " exceeds max_positions " +
                      std::to_string(cfg.max_positions));
  }
  Tensor table = effective_embedding(e, cfg);
  Tensor x = embedding_lookup(table, tokens, batch, seq);

  std::vector<int> pos_ids(static_cast<std::size_t>(batch) * seq);
  for (int b = 0; b < batch; ++b)
    for (int n = 0; n < seq; ++n) pos_ids[static_cast<std::size_t>(b) * seq + n] = n;
  x = add(x, embedding_lookup(e.positional, pos_ids, batch, seq));

  if (e.token_type.defined()) {
    // Single-segment data: all positions use type 0.
    std::vector<int> type_ids(static_cast<std::size_t>(batch) * seq, 0);
    x = add(x, embedding_lookup(e.token_type, type_ids, batch, seq));
  }

  x = layer_norm(x, e.ln_gain, e.ln_bias);
  return maybe_dropout(x, cfg, opts);
}

Tensor adapter_apply(const Tensor& x, const AdapterParams& a, AdapterNonlinearity nl) {
  Tensor h = add_bias(matmul(x, a.down_w), a.down_b);
  h = nl == AdapterNonlinearity::kRelu ? relu(h) : gelu(h);
  return add(add_bias(matmul(h, a.up_w), a.up_b), x);
}

BlockOutput block_forward(const Tensor& x, const TransformerBlockParams& p,
                          const AdapterPair* adapters, const std::vector<uint8_t>& attn_valid,
                          const ModelConfig& cfg, const ForwardOptions& opts) {
  if (x.ndim() != 3 || x.dim(2) != cfg.hidden_dim) {
    throw ShapeError("block_forward: input must be [B,N,d]");
  }
  const int B = x.dim(0), N = x.dim(1), d = cfg.hidden_dim;
  const int H = cfg.num_heads, dh = cfg.head_dim();
  if (static_cast<int>(attn_valid.size()) != B * N) {
    throw ShapeError("block_forward: attention mask must have B*N entries");
  }

  Tensor att_in = adapters ? adapter_apply(x, adapters->att, cfg.adapter_nonlinearity) : x;

  auto split_heads = [&](const Tensor& t) {
    return permute(reshape(t, {B, N, H, dh}), {0, 2, 1, 3});  // [B,H,N,dh]
  };
  Tensor q = split_heads(add_bias(matmul(att_in, p.q_w), p.q_b));
  Tensor k = split_heads(add_bias(matmul(att_in, p.k_w), p.k_b));
  Tensor v = split_heads(add_bias(matmul(att_in, p.v_w), p.v_b));

  Tensor scores = scale(matmul(q, k, /*transpose_b=*/true), 1.0 / std::sqrt(double(dh)));
  scores = add_key_padding_mask(scores, attn_valid, B, N);
  Tensor attention = softmax(scores, -1);  // exported pre-dropout

  Tensor probs = maybe_dropout(attention, cfg, opts);
  Tensor ctx = reshape(permute(matmul(probs, v), {0, 2, 1, 3}), {B, N, d});
  Tensor att_out = maybe_dropout(add_bias(matmul(ctx, p.o_w), p.o_b), cfg, opts);
  Tensor y = layer_norm(add(att_in, att_out), p.ln1_gain, p.ln1_bias);

  Tensor mlp_in = adapters ? adapter_apply(y, adapters->mlp, cfg.adapter_nonlinearity) : y;
  Tensor ffn = add_bias(matmul(gelu(add_bias(matmul(mlp_in, p.ffn1_w), p.ffn1_b)), p.ffn2_w),
                        p.ffn2_b);
  ffn = maybe_dropout(ffn, cfg, opts);
  Tensor out = layer_norm(add(mlp_in, ffn), p.ln2_gain, p.ln2_bias);

  return {out, attention};
}

Tensor mlm_head_forward(const Tensor& hidden, const MlmHeadParams& head,
                        const EmbeddingParams& embedding, const ModelConfig& cfg) {
  Tensor h = gelu(add_bias(matmul(hidden, head.dense_w), head.dense_b));
  h = layer_norm(h, head.ln_gain, head.ln_bias);
  Tensor table = effective_embedding(embedding, cfg);  // decoder tied to E
  return add_bias(matmul(h, table, /*transpose_b=*/true), head.decoder_bias);
}

namespace {

ForwardTrace encoder_forward(const std::vector<int>& tokens,
                             const std::vector<uint8_t>& attn_valid, int batch, int seq,
                             const ModelConfig& cfg, const EmbeddingParams& embedding,
                             const std::function<const TransformerBlockParams&(int)>& block_at,
                             const std::function<const AdapterPair*(int)>& adapters_at,
                             const MlmHeadParams& head, const ForwardOptions& opts) {
  ForwardTrace trace;
  Tensor x = embed(tokens, batch, seq, embedding, cfg, opts);
  trace.hidden_states.push_back(x);
  for (int i = 0; i < cfg.num_layers; ++i) {
    BlockOutput out = block_forward(x, block_at(i), adapters_at(i), attn_valid, cfg, opts);
    x = out.hidden;
    trace.hidden_states.push_back(out.hidden);
    trace.attention_maps.push_back(out.attention);
  }
  trace.final_logits = mlm_head_forward(x, head, embedding, cfg);
  return trace;
}

}  // namespace

ForwardTrace teacher_forward(const std::vector<int>& tokens,
                             const std::vector<uint8_t>& attn_valid, int batch, int seq,
                             const TeacherModel& model, const ForwardOptions& opts) {
  return encoder_forward(
      tokens, attn_valid, batch, seq, model.config, model.embedding,
      [&](int i) -> const TransformerBlockParams& {
        return model.layers[static_cast<std::size_t>(i)].block;
      },
      [&](int i) -> const AdapterPair* {
        const auto& a = model.layers[static_cast<std::size_t>(i)].adapters;
        return a ? &*a : nullptr;
      },
      model.mlm_head, opts);
}

ForwardTrace student_forward(const std::vector<int>& tokens,
                             const std::vector<uint8_t>& attn_valid, int batch, int seq,
                             const RecursiveStudent& model, const ForwardOptions& opts) {
  return encoder_forward(
      tokens, attn_valid, batch, seq, model.config, model.embedding,
      [&](int) -> const TransformerBlockParams& { return model.block; },
      [&](int i) -> const AdapterPair* {
        return model.adapters.empty() ? nullptr : &model.adapters[static_cast<std::size_t>(i)];
      },
      model.mlm_head, opts);
}

}  // namespace rd
