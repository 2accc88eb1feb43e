#include "rd/data/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "rd/common/errors.hpp"

namespace rd {

namespace {

const char* kReservedNames[Vocabulary::kNumReserved] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                        "[MASK]"};

}  // namespace

TokenMode token_mode_from_string(const std::string& s) {
  if (s == "word") return TokenMode::kWord;
  if (s == "char") return TokenMode::kChar;
  throw ConfigError("unknown token mode: " + s);
}

std::string to_string(TokenMode m) { return m == TokenMode::kWord ? "word" : "char"; }

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved) {
    throw CorruptArtifactError("vocabulary smaller than the reserved token set");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens_[static_cast<std::size_t>(i)] != kReservedNames[i]) {
      throw CorruptArtifactError("vocabulary reserved token mismatch at id " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw CorruptArtifactError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open vocabulary for writing: " + path);
  for (const auto& t : tokens_) os << t << "\n";
  if (!os) throw std::runtime_error("failed writing vocabulary: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CorruptArtifactError("cannot open vocabulary: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

std::vector<std::string> tokenize(const std::string& text, TokenMode mode) {
  std::vector<std::string> out;
  if (mode == TokenMode::kWord) {
    std::string cur;
    for (char c : text) {
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
  } else {
    for (char c : text) {
      if (c == '\r' || c == '\n') continue;
      out.emplace_back(1, c);
    }
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& documents, int size, TokenMode mode) {
  if (documents.empty()) throw ConfigError("build_vocab: empty corpus");
  if (size < Vocabulary::kNumReserved + 1) {
    throw ConfigError("build_vocab: size must exceed the reserved token count");
  }
  // std::map keeps the frequency tie-break lexical and deterministic.
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : documents) {
    for (auto& t : tokenize(doc, mode)) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens;
  for (int i = 0; i < Vocabulary::kNumReserved; ++i) tokens.emplace_back(kReservedNames[i]);
  for (const auto& [t, n] : ranked) {
    if (static_cast<int>(tokens.size()) >= size) break;
    tokens.push_back(t);
  }
  return Vocabulary(std::move(tokens));
}

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::vector<std::string> read_documents(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open corpus: " + path);
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) docs.push_back(line);
  }
  return docs;
}

}  // namespace rd
