#include "rd/eval/metrics.hpp"

#include <algorithm>
#include <set>

#include "rd/common/errors.hpp"
#include "rd/common/log.hpp"

namespace rd {

F1Scheme f1_scheme_from_string(const std::string& s) {
  if (s == "token_micro") return F1Scheme::kTokenMicro;
  if (s == "entity_span") return F1Scheme::kEntitySpan;
  throw ConfigError("unknown F1 scheme: " + s);
}

namespace {

double f1_from_counts(long long tp, long long fp, long long fn) {
  const long long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

F1Result multiclass_f1(const std::vector<int>& predictions, const std::vector<int>& gold,
                       int num_labels) {
  if (predictions.size() != gold.size()) throw ConfigError("f1: length mismatch");
  F1Result result;
  result.per_class.resize(static_cast<std::size_t>(num_labels));
  long long tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int p = predictions[i], g = gold[i];
    if (p < 0 || p >= num_labels || g < 0 || g >= num_labels) {
      throw ConfigError("f1: label id out of range");
    }
    ++result.per_class[static_cast<std::size_t>(g)].support;
    if (p == g) {
      ++result.per_class[static_cast<std::size_t>(p)].tp;
      ++tp_all;
    } else {
      ++result.per_class[static_cast<std::size_t>(p)].fp;
      ++result.per_class[static_cast<std::size_t>(g)].fn;
      ++fp_all;
      ++fn_all;
    }
  }
  result.micro = f1_from_counts(tp_all, fp_all, fn_all);
  double macro = 0.0;
  for (const auto& c : result.per_class) macro += f1_from_counts(c.tp, c.fp, c.fn);
  result.macro = num_labels == 0 ? 0.0 : macro / num_labels;
  return result;
}

std::vector<Span> decode_bio_spans(const std::vector<int>& tags,
                                   const std::vector<std::string>& label_names) {
  std::vector<Span> spans;
  std::string open_type;
  std::size_t open_begin = 0;
  bool open = false;
  auto close = [&](std::size_t end) {
    if (open) spans.push_back({open_type, open_begin, end});
    open = false;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int t = tags[i];
    if (t < 0) {  // excluded position ([CLS]/[SEP]/[PAD])
      close(i);
      continue;
    }
    if (t >= static_cast<int>(label_names.size())) throw ConfigError("bio: tag id out of range");
    const std::string& name = label_names[static_cast<std::size_t>(t)];
    if (name == "O") {
      close(i);
      continue;
    }
    if (name.size() < 3 || (name[0] != 'B' && name[0] != 'I') || name[1] != '-') {
      throw ConfigError("bio: malformed label name: " + name);
    }
    const std::string type = name.substr(2);
    if (name[0] == 'B' || !open || type != open_type) {
      if (name[0] == 'I' && (!open || type != open_type)) {
        log_warn("bio: stray I-" + type + " treated as B-" + type);
      }
      close(i);
      open = true;
      open_type = type;
      open_begin = i;
    }
    // I- continuing the open span of the same type: nothing to do.
  }
  close(tags.size());
  return spans;
}

double f1_score(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& gold, F1Scheme scheme,
                const std::vector<std::string>& label_names) {
  if (predictions.size() != gold.size()) throw ConfigError("f1_score: sequence count mismatch");

  if (scheme == F1Scheme::kTokenMicro) {
    int o_id = -1;
    for (std::size_t i = 0; i < label_names.size(); ++i) {
      if (label_names[i] == "O") o_id = static_cast<int>(i);
    }
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
      if (predictions[s].size() != gold[s].size()) throw ConfigError("f1_score: length mismatch");
      for (std::size_t i = 0; i < gold[s].size(); ++i) {
        const int p = predictions[s][i], g = gold[s][i];
        if (g < 0) continue;  // excluded position
        const bool p_entity = p != o_id && p >= 0;
        const bool g_entity = g != o_id;
        if (p_entity && g_entity && p == g) {
          ++tp;
        } else {
          if (p_entity) ++fp;
          if (g_entity) ++fn;
        }
      }
    }
    return f1_from_counts(tp, fp, fn);
  }

  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (predictions[s].size() != gold[s].size()) throw ConfigError("f1_score: length mismatch");
    auto pred_spans = decode_bio_spans(predictions[s], label_names);
    auto gold_spans = decode_bio_spans(gold[s], label_names);
    std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());
    for (const auto& span : pred_spans) {
      if (gold_set.erase(span)) {
        ++tp;
      } else {
        ++fp;
      }
    }
    fn += static_cast<long long>(gold_set.size());
  }
  return f1_from_counts(tp, fp, fn);
}

}  // namespace rd
