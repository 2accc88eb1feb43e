#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rd/model/config.hpp"
#include "rd/numerics/tensor.hpp"

namespace rd {

// Weight init stddev (layer norms start at gain 1 / bias 0).
inline constexpr double kInitStddev = 0.02;

struct EmbeddingParams {
  Tensor e_low;       // |V| x r
  Tensor w_e;         // r x d, present only when factorized
  Tensor positional;  // max_positions x d
  Tensor token_type;  // 2 x d, present only when use_token_type
  Tensor ln_gain;
  Tensor ln_bias;

  EmbeddingParams clone() const;
};

struct TransformerBlockParams {
  Tensor q_w, q_b;
  Tensor k_w, k_b;
  Tensor v_w, v_b;
  Tensor o_w, o_b;
  Tensor ffn1_w, ffn1_b;
  Tensor ffn2_w, ffn2_b;
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;

  TransformerBlockParams clone() const;
};

struct AdapterParams {
  Tensor down_w;  // d x b
  Tensor down_b;  // b
  Tensor up_w;    // b x d, zero at init so the adapter starts as identity
  Tensor up_b;    // d

  AdapterParams clone() const;
};

struct AdapterPair {
  AdapterParams att;
  AdapterParams mlp;

  AdapterPair clone() const { return {att.clone(), mlp.clone()}; }
};

struct MlmHeadParams {
  Tensor dense_w, dense_b;  // d x d
  Tensor ln_gain, ln_bias;
  Tensor decoder_bias;  // |V|; decoder weight is tied to the effective embedding

  MlmHeadParams clone() const;
};

struct EncoderLayer {
  TransformerBlockParams block;
  std::optional<AdapterPair> adapters;
};

struct TeacherModel {
  ModelConfig config;
  EmbeddingParams embedding;
  std::vector<EncoderLayer> layers;  // num_layers distinct blocks
  MlmHeadParams mlm_head;
};

struct RecursiveStudent {
  ModelConfig config;
  EmbeddingParams embedding;
  TransformerBlockParams block;      // the single shared block
  std::vector<AdapterPair> adapters; // num_layers pairs, or empty
  MlmHeadParams mlm_head;
};

EmbeddingParams init_embedding(const ModelConfig& cfg, std::mt19937_64& rng);
TransformerBlockParams init_block(const ModelConfig& cfg, std::mt19937_64& rng);
AdapterParams init_adapter(const ModelConfig& cfg, std::mt19937_64& rng);
MlmHeadParams init_mlm_head(const ModelConfig& cfg, std::mt19937_64& rng);
TeacherModel init_teacher(const ModelConfig& cfg, std::mt19937_64& rng);
RecursiveStudent init_student(const ModelConfig& cfg, std::mt19937_64& rng);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

std::vector<NamedParam> collect_params(const EmbeddingParams& e, const std::string& prefix);
std::vector<NamedParam> collect_params(const TeacherModel& m);
std::vector<NamedParam> collect_params(const RecursiveStudent& m);

bool is_mlm_head_param(const std::string& name);
bool is_adapter_param(const std::string& name);

// Exact element count over a name filter (nullptr filter counts everything).
std::int64_t count_parameters(const std::vector<NamedParam>& params,
                              const std::function<bool(const std::string&)>& filter = nullptr);

// Backbone count used for parameter-budget reporting: everything except the
// MLM head, which is dropped before fine-tuning.
std::int64_t count_backbone_parameters(const std::vector<NamedParam>& params);

// Smallest bottleneck width whose 2L adapters reach min_params total weights.
int derive_adapter_bottleneck(int hidden_dim, int num_layers, std::int64_t min_params = 850000);

void set_requires_grad_all(const std::vector<NamedParam>& params, bool rg);
void zero_grad_all(const std::vector<NamedParam>& params);

// FNV-1a over the raw bytes of every parameter, in name order.
uint64_t params_checksum(const std::vector<NamedParam>& params);

// Fully-parameterized copy of the recursive student: num_layers deep copies
// of the shared block with each iteration's adapters attached. Used as the
// unroll oracle for forward and tied-gradient equivalence.
TeacherModel materialize_unrolled(const RecursiveStudent& student);

}  // namespace rd
