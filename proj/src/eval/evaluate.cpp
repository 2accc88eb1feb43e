#include "rd/eval/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rd/common/errors.hpp"
#include "rd/model/forward.hpp"
#include "rd/numerics/ops.hpp"

namespace rd {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int argmax_row(const double* row, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "accuracy,micro_f1,macro_f1,span_f1,examples,params_total,params_tunable,ms_per_step\n"
     << format_value(accuracy) << "," << format_value(micro_f1) << "," << format_value(macro_f1)
     << "," << format_value(span_f1) << "," << example_count << "," << params_total << ","
     << params_tunable << "," << format_value(ms_per_step) << "\n";
  return os.str();
}

std::string EvalReport::to_text(const std::vector<std::string>& label_names) const {
  std::ostringstream os;
  os << "examples:       " << example_count << "\n"
     << "accuracy:       " << format_value(accuracy) << "\n"
     << "micro F1:       " << format_value(micro_f1) << "\n"
     << "macro F1:       " << format_value(macro_f1) << "\n"
     << "span F1:        " << format_value(span_f1) << "\n"
     << "params total:   " << params_total << "\n"
     << "params tunable: " << params_tunable << "\n"
     << "ms per step:    " << format_value(ms_per_step) << "\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& k = per_class[c];
    os << "class " << (c < label_names.size() ? label_names[c] : std::to_string(c)) << ": tp="
       << k.tp << " fp=" << k.fp << " fn=" << k.fn << " support=" << k.support << "\n";
  }
  return os.str();
}

EvalReport evaluate(const RecursiveStudent& model, const TaskHead& head,
                    const TaskDataset& dataset, int batch_size) {
  if (dataset.size() == 0) throw ConfigError("evaluate: empty dataset");
  if (head.num_labels != dataset.num_labels) {
    throw ConfigError("evaluate: head/dataset label spaces disagree");
  }
  const bool sequence = dataset.kind == HeadKind::kSequenceClassification;
  if ((head.kind == HeadKind::kSequenceClassification) != sequence) {
    throw ConfigError("evaluate: head kind does not match dataset kind");
  }

  EvalReport report;
  report.example_count = dataset.size();
  auto model_params = collect_params(model);
  auto head_params = collect_params(head);
  report.params_total = count_parameters(model_params) + count_parameters(head_params);
  std::int64_t tunable = 0;
  for (const auto& p : model_params) {
    if (p.tensor.requires_grad()) tunable += static_cast<std::int64_t>(p.tensor.numel());
  }
  for (const auto& p : head_params) {
    if (p.tensor.requires_grad()) tunable += static_cast<std::int64_t>(p.tensor.numel());
  }
  report.params_tunable = tunable;

  std::vector<int> flat_pred, flat_gold;            // classification / token labels
  std::vector<std::vector<int>> seq_pred, seq_gold;  // per-sequence tags

  const auto t_start = std::chrono::steady_clock::now();
  std::size_t steps = 0;
  for (std::size_t begin = 0; begin < dataset.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size),
                                       dataset.size() - begin);
    std::size_t max_len = 0;
    for (std::size_t i = 0; i < count; ++i) {
      max_len = std::max(max_len, sequence ? dataset.classification[begin + i].tokens.size()
                                           : dataset.tagging[begin + i].tokens.size());
    }
    std::vector<int> tokens;
    std::vector<uint8_t> valid;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& toks = sequence ? dataset.classification[begin + i].tokens
                                  : dataset.tagging[begin + i].tokens;
      const auto& val = sequence ? dataset.classification[begin + i].valid
                                 : dataset.tagging[begin + i].valid;
      tokens.insert(tokens.end(), toks.begin(), toks.end());
      tokens.resize(tokens.size() + (max_len - toks.size()), Vocabulary::kPad);
      valid.insert(valid.end(), val.begin(), val.end());
      valid.resize(valid.size() + (max_len - val.size()), 0);
    }

    ForwardTrace trace = student_forward(tokens, valid, static_cast<int>(count),
                                         static_cast<int>(max_len), model);
    Tensor logits = head_forward(trace, head);
    ++steps;

    if (sequence) {
      for (std::size_t i = 0; i < count; ++i) {
        flat_pred.push_back(argmax_row(logits.data() + i * head.num_labels, head.num_labels));
        flat_gold.push_back(dataset.classification[begin + i].label);
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        const auto& ex = dataset.tagging[begin + i];
        std::vector<int> pred_tags(ex.tags.size(), -1);
        for (std::size_t n = 0; n < ex.tags.size(); ++n) {
          if (ex.tags[n] < 0) continue;
          const double* row = logits.data() + (i * max_len + n) * head.num_labels;
          pred_tags[n] = argmax_row(row, head.num_labels);
          flat_pred.push_back(pred_tags[n]);
          flat_gold.push_back(ex.tags[n]);
        }
        seq_pred.push_back(std::move(pred_tags));
        seq_gold.push_back(ex.tags);
      }
    }
  }
  report.ms_per_step =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count() /
      static_cast<double>(steps);

  long long correct = 0;
  for (std::size_t i = 0; i < flat_gold.size(); ++i) correct += flat_pred[i] == flat_gold[i];
  report.accuracy =
      flat_gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(flat_gold.size());
  F1Result f1 = multiclass_f1(flat_pred, flat_gold, dataset.num_labels);
  report.micro_f1 = f1.micro;
  report.macro_f1 = f1.macro;
  report.per_class = f1.per_class;
  if (!sequence) {
    report.span_f1 = f1_score(seq_pred, seq_gold, F1Scheme::kEntitySpan, dataset.label_names);
  }
  return report;
}

namespace {

std::vector<int> encode_with_specials(const std::vector<std::string>& words,
                                      const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(Vocabulary::kCls);
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.push_back(Vocabulary::kSep);
  return ids;
}

}  // namespace

TaskDataset load_classification_dataset(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open classification dataset: " + path);
  TaskDataset ds;
  ds.kind = HeadKind::kSequenceClassification;

  std::vector<std::pair<std::string, std::string>> rows;
  std::map<std::string, int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw CorruptArtifactError("malformed classification line " + std::to_string(line_no) +
                                 " in " + path);
    }
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    labels.emplace(rows.back().second, 0);
  }
  if (rows.empty()) throw ConfigError("classification dataset is empty: " + path);
  int next = 0;
  for (auto& [name, id] : labels) {
    id = next++;
    ds.label_names.push_back(name);
  }
  ds.num_labels = next;
  if (ds.num_labels < 2) throw ConfigError("classification dataset needs >= 2 labels: " + path);

  for (const auto& [text, label] : rows) {
    ClassificationExample ex;
    ex.tokens = encode_with_specials(tokenize(text, TokenMode::kWord), vocab);
    ex.valid.assign(ex.tokens.size(), 1);
    ex.label = labels.at(label);
    ds.classification.push_back(std::move(ex));
  }
  return ds;
}

TaskDataset load_tagging_dataset(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open tagging dataset: " + path);
  TaskDataset ds;
  ds.kind = HeadKind::kTokenClassification;

  std::vector<std::vector<std::pair<std::string, std::string>>> blocks(1);
  std::map<std::string, int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!blocks.back().empty()) blocks.emplace_back();
      continue;
    }
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
      throw CorruptArtifactError("malformed tagging line " + std::to_string(line_no) + " in " +
                                 path);
    }
    blocks.back().emplace_back(line.substr(0, sp), line.substr(sp + 1));
    labels.emplace(line.substr(sp + 1), 0);
  }
  if (blocks.back().empty()) blocks.pop_back();
  if (blocks.empty()) throw ConfigError("tagging dataset is empty: " + path);

  int next = 0;
  for (auto& [name, id] : labels) {
    id = next++;
    ds.label_names.push_back(name);
  }
  ds.num_labels = next;
  if (ds.num_labels < 2) throw ConfigError("tagging dataset needs >= 2 tags: " + path);

  for (const auto& block : blocks) {
    TaggingExample ex;
    ex.tokens.push_back(Vocabulary::kCls);
    ex.tags.push_back(-1);
    for (const auto& [word, tag] : block) {
      ex.tokens.push_back(vocab.id(word));
      ex.tags.push_back(labels.at(tag));
    }
    ex.tokens.push_back(Vocabulary::kSep);
    ex.tags.push_back(-1);
    ex.valid.assign(ex.tokens.size(), 1);
    ds.tagging.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace rd
