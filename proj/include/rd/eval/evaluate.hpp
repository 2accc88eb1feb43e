#pragma once

#include <string>

#include "rd/data/vocab.hpp"
#include "rd/eval/head.hpp"
#include "rd/eval/metrics.hpp"
#include "rd/model/params.hpp"

namespace rd {

struct EvalReport {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  // Exact-span BIO F1; only populated for token classification.
  double span_f1 = 0.0;
  std::vector<ClassCounts> per_class;
  std::size_t example_count = 0;
  std::int64_t params_total = 0;
  std::int64_t params_tunable = 0;
  double ms_per_step = 0.0;

  std::string to_csv() const;
  std::string to_text(const std::vector<std::string>& label_names = {}) const;
};

// Single deterministic pass (dropout off) over the dataset.
EvalReport evaluate(const RecursiveStudent& model, const TaskHead& head,
                    const TaskDataset& dataset, int batch_size = 16);

// `text<TAB>label` lines; labels become ids in sorted name order.
TaskDataset load_classification_dataset(const std::string& path, const Vocabulary& vocab);

// CoNLL-style `token<SPACE>tag` lines in blank-line-separated blocks.
TaskDataset load_tagging_dataset(const std::string& path, const Vocabulary& vocab);

}  // namespace rd
