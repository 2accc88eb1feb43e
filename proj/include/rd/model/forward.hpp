#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rd/model/params.hpp"
#include "rd/numerics/tensor.hpp"

namespace rd {

// Hidden states and attention maps captured during a forward pass.
// hidden_states[0] is the embedding output; entries 1..L are layer outputs.
// attention_maps[l] is the pre-dropout post-softmax map of layer l+1,
// shaped [batch, heads, seq, seq].
struct ForwardTrace {
  std::vector<Tensor> hidden_states;
  std::vector<Tensor> attention_maps;
  Tensor final_logits;  // [batch, seq, vocab]
};

struct ForwardOptions {
  bool train = false;
  std::mt19937_64* rng = nullptr;  // required when train and dropout_prob > 0
};

// Effective embedding table E = E_low * W_e (or E_low directly at full rank).
Tensor effective_embedding(const EmbeddingParams& e, const ModelConfig& cfg);

Tensor embed(const std::vector<int>& tokens, int batch, int seq,
             const EmbeddingParams& e, const ModelConfig& cfg,
             const ForwardOptions& opts = {});

// Residual bottleneck: up(sigma(down(x))) + x.
Tensor adapter_apply(const Tensor& x, const AdapterParams& a, AdapterNonlinearity nl);

struct BlockOutput {
  Tensor hidden;
  Tensor attention;
};

// Post-layer-norm transformer block. When adapters is non-null each sub-block
// consumes the adapted input and its residual is taken from that same input.
BlockOutput block_forward(const Tensor& x, const TransformerBlockParams& p,
                          const AdapterPair* adapters,
                          const std::vector<uint8_t>& attn_valid,
                          const ModelConfig& cfg, const ForwardOptions& opts = {});

Tensor mlm_head_forward(const Tensor& hidden, const MlmHeadParams& head,
                        const EmbeddingParams& embedding, const ModelConfig& cfg);

ForwardTrace teacher_forward(const std::vector<int>& tokens,
                             const std::vector<uint8_t>& attn_valid, int batch, int seq,
                             const TeacherModel& model, const ForwardOptions& opts = {});

ForwardTrace student_forward(const std::vector<int>& tokens,
                             const std::vector<uint8_t>& attn_valid, int batch, int seq,
                             const RecursiveStudent& model, const ForwardOptions& opts = {});

}  // namespace rd
