#pragma once

#include <map>
#include <string>

namespace rd {

enum class AdapterNonlinearity { kRelu, kGelu };

std::string to_string(AdapterNonlinearity nl);
AdapterNonlinearity adapter_nonlinearity_from_string(const std::string& s);

// Architecture hyperparameters shared by the teacher and the recursive
// student. num_layers is the number of distinct layers for a teacher and the
// number of iterations of the single shared block for a student.
struct ModelConfig {
  int hidden_dim = 768;
  int num_heads = 12;
  int ffn_dim = 3072;
  int num_layers = 12;
  int vocab_size = 30522;
  int max_positions = 512;
  int embedding_rank = 768;   // == hidden_dim means full rank, no factorization
  int adapter_bottleneck = 0; // 0 means no adapters
  AdapterNonlinearity adapter_nonlinearity = AdapterNonlinearity::kGelu;
  double dropout_prob = 0.1;
  bool use_token_type = false;

  bool factorized() const { return embedding_rank != hidden_dim; }
  int head_dim() const { return hidden_dim / num_heads; }

  // Throws ConfigError on violated invariants (d % H, r <= d, b < d, ...).
  void validate() const;

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

}  // namespace rd
