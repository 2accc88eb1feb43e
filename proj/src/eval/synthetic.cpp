#include "rd/eval/synthetic.hpp"

#include <random>

#include "rd/common/errors.hpp"
#include "rd/data/vocab.hpp"
#include "rd/numerics/rng.hpp"

namespace rd {

namespace {

constexpr int kNumKeywords = 3;

// Keywords/sublexicon live at the bottom of the non-reserved id range so any
// desk-scale vocabulary contains them.
int keyword_id(int k) { return Vocabulary::kNumReserved + k; }

void check_dims(int num_examples, int vocab_size, int seq_len) {
  if (num_examples <= 0 || seq_len < 3) {
    throw ConfigError("synthetic task needs positive examples and seq_len >= 3");
  }
  if (vocab_size < Vocabulary::kNumReserved + 2 * kNumKeywords) {
    throw ConfigError("synthetic task needs a larger vocabulary");
  }
}

}  // namespace

TaskDataset synthetic_classification(int num_examples, int vocab_size, int seq_len,
                                     uint64_t seed) {
  check_dims(num_examples, vocab_size, seq_len);
  TaskDataset ds;
  ds.kind = HeadKind::kSequenceClassification;
  ds.num_labels = 2;
  ds.label_names = {"absent", "present"};

  auto rng = make_rng(seed, "synthetic-classification");
  // Distractors exclude the keyword range.
  std::uniform_int_distribution<int> distractor(keyword_id(kNumKeywords), vocab_size - 1);
  std::uniform_int_distribution<int> keyword(0, kNumKeywords - 1);
  const int body = seq_len - 2;
  std::uniform_int_distribution<int> position(1, body);

  for (int i = 0; i < num_examples; ++i) {
    ClassificationExample ex;
    ex.tokens.assign(static_cast<std::size_t>(seq_len), 0);
    ex.tokens.front() = Vocabulary::kCls;
    for (int j = 1; j <= body; ++j) ex.tokens[static_cast<std::size_t>(j)] = distractor(rng);
    ex.tokens.back() = Vocabulary::kSep;
    ex.label = i % 2;  // balanced by construction
    if (ex.label == 1) {
      ex.tokens[static_cast<std::size_t>(position(rng))] = keyword_id(keyword(rng));
    }
    ex.valid.assign(static_cast<std::size_t>(seq_len), 1);
    ds.classification.push_back(std::move(ex));
  }
  return ds;
}

TaskDataset synthetic_tagging(int num_examples, int vocab_size, int seq_len, uint64_t seed) {
  check_dims(num_examples, vocab_size, seq_len);
  TaskDataset ds;
  ds.kind = HeadKind::kTokenClassification;
  ds.num_labels = 3;
  ds.label_names = {"O", "B-ENT", "I-ENT"};

  auto rng = make_rng(seed, "synthetic-tagging");
  std::uniform_int_distribution<int> distractor(keyword_id(kNumKeywords), vocab_size - 1);
  std::uniform_int_distribution<int> sublexicon(0, kNumKeywords - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int body = seq_len - 2;

  for (int i = 0; i < num_examples; ++i) {
    TaggingExample ex;
    ex.tokens.push_back(Vocabulary::kCls);
    ex.tags.push_back(-1);
    bool prev_entity = false;
    for (int j = 0; j < body; ++j) {
      // ~25% entity tokens; adjacent ones merge into multi-token entities.
      if (coin(rng) < 0.25) {
        ex.tokens.push_back(keyword_id(sublexicon(rng)));
        ex.tags.push_back(prev_entity ? 2 : 1);  // I-ENT : B-ENT
        prev_entity = true;
      } else {
        ex.tokens.push_back(distractor(rng));
        ex.tags.push_back(0);  // O
        prev_entity = false;
      }
    }
    ex.tokens.push_back(Vocabulary::kSep);
    ex.tags.push_back(-1);
    ex.valid.assign(ex.tokens.size(), 1);
    ds.tagging.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace rd
