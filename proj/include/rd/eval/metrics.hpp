#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace rd {

enum class F1Scheme { kTokenMicro, kEntitySpan };

F1Scheme f1_scheme_from_string(const std::string& s);

struct ClassCounts {
  long long tp = 0, fp = 0, fn = 0, support = 0;
};

struct F1Result {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<ClassCounts> per_class;
};

// Multiclass precision/recall counts over flat label ids.
F1Result multiclass_f1(const std::vector<int>& predictions, const std::vector<int>& gold,
                       int num_labels);

// A decoded entity: label type plus [begin, end) token range.
struct Span {
  std::string type;
  std::size_t begin = 0, end = 0;

  bool operator==(const Span& other) const = default;
  bool operator<(const Span& other) const {
    return std::tie(begin, end, type) < std::tie(other.begin, other.end, other.type);
  }
};

// BIO decoding with stray I- repaired as B- (logged). label_names maps tag
// ids to "O" / "B-X" / "I-X" strings; positions tagged -1 are skipped.
std::vector<Span> decode_bio_spans(const std::vector<int>& tags,
                                   const std::vector<std::string>& label_names);

// Sequence-labelling F1. token_micro micro-averages over non-"O" token
// labels; entity_span scores exact-span matches over decoded BIO entities.
double f1_score(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& gold, F1Scheme scheme,
                const std::vector<std::string>& label_names);

}  // namespace rd
