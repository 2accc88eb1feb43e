#include "rd/model/config.hpp"

#include "rd/common/errors.hpp"

namespace rd {

std::string to_string(AdapterNonlinearity nl) {
  return nl == AdapterNonlinearity::kRelu ? "relu" : "gelu";
}

AdapterNonlinearity adapter_nonlinearity_from_string(const std::string& s) {
  if (s == "relu") return AdapterNonlinearity::kRelu;
  if (s == "gelu") return AdapterNonlinearity::kGelu;
  throw ConfigError("unknown adapter nonlinearity: " + s);
}

void ModelConfig::validate() const {
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (num_heads <= 0) throw ConfigError("num_heads must be positive");
  if (hidden_dim % num_heads != 0) throw ConfigError("hidden_dim must be divisible by num_heads");
  if (ffn_dim <= 0) throw ConfigError("ffn_dim must be positive");
  if (num_layers <= 0) throw ConfigError("num_layers must be positive");
  if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  if (max_positions <= 0) throw ConfigError("max_positions must be positive");
  if (embedding_rank <= 0 || embedding_rank > hidden_dim) {
    throw ConfigError("embedding_rank must be in [1, hidden_dim]");
  }
  if (adapter_bottleneck < 0 || adapter_bottleneck >= hidden_dim) {
    throw ConfigError("adapter_bottleneck must be in [0, hidden_dim)");
  }
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) {
    throw ConfigError("dropout_prob must be in [0, 1)");
  }
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"hidden_dim", std::to_string(hidden_dim)},
      {"num_heads", std::to_string(num_heads)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"num_layers", std::to_string(num_layers)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_positions", std::to_string(max_positions)},
      {"embedding_rank", std::to_string(embedding_rank)},
      {"adapter_bottleneck", std::to_string(adapter_bottleneck)},
      {"adapter_nonlinearity", to_string(adapter_nonlinearity)},
      {"dropout_prob", std::to_string(dropout_prob)},
      {"use_token_type", use_token_type ? "1" : "0"},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("missing model config key: ") + key);
    return it->second;
  };
  cfg.hidden_dim = std::stoi(get("hidden_dim"));
  cfg.num_heads = std::stoi(get("num_heads"));
  cfg.ffn_dim = std::stoi(get("ffn_dim"));
  cfg.num_layers = std::stoi(get("num_layers"));
  cfg.vocab_size = std::stoi(get("vocab_size"));
  cfg.max_positions = std::stoi(get("max_positions"));
  cfg.embedding_rank = std::stoi(get("embedding_rank"));
  cfg.adapter_bottleneck = std::stoi(get("adapter_bottleneck"));
  cfg.adapter_nonlinearity = adapter_nonlinearity_from_string(get("adapter_nonlinearity"));
  cfg.dropout_prob = std::stod(get("dropout_prob"));
  cfg.use_token_type = get("use_token_type") == "1";
  cfg.validate();
  return cfg;
}

}  // namespace rd
