#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace rd {

enum class TokenMode { kWord, kChar };

TokenMode token_mode_from_string(const std::string& s);
std::string to_string(TokenMode m);

// Dense token-id table with five reserved ids at the front.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumReserved = 5;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  // Returns kUnk for unknown strings.
  int id(const std::string& token) const;
  static bool is_reserved(int id) { return id >= 0 && id < kNumReserved; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<std::string> tokenize(const std::string& text, TokenMode mode);

// Frequency-ranked vocabulary over the documents; ties break lexically so
// the result is deterministic. size caps the total including reserved ids.
Vocabulary build_vocab(const std::vector<std::string>& documents, int size, TokenMode mode);

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// One UTF-8 document per line; empty lines are skipped.
std::vector<std::string> read_documents(const std::string& path);

}  // namespace rd
