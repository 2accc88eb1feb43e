#include "rd/eval/head.hpp"

#include "rd/common/errors.hpp"
#include "rd/numerics/ops.hpp"

namespace rd {

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sequence" || s == "sequence_classification") return HeadKind::kSequenceClassification;
  if (s == "token" || s == "token_classification") return HeadKind::kTokenClassification;
  throw ConfigError("unknown head kind: " + s);
}

std::string to_string(HeadKind k) {
  return k == HeadKind::kSequenceClassification ? "sequence_classification"
                                                : "token_classification";
}

TaskHead init_task_head(HeadKind kind, int hidden_dim, int num_labels, std::mt19937_64& rng) {
  if (num_labels < 2) throw ConfigError("task head needs at least 2 labels");
  if (hidden_dim <= 0) throw ConfigError("task head needs a positive hidden dim");
  TaskHead head;
  head.kind = kind;
  head.num_labels = num_labels;
  head.proj_w = Tensor::randn({hidden_dim, num_labels}, rng, kInitStddev, true);
  head.proj_b = Tensor::zeros({num_labels}, true);
  return head;
}

std::vector<NamedParam> collect_params(const TaskHead& head) {
  return {{"head.proj_w", head.proj_w}, {"head.proj_b", head.proj_b}};
}

Tensor head_forward(const ForwardTrace& trace, const TaskHead& head,
                    const ForwardOptions& opts) {
  if (trace.hidden_states.empty()) throw ConfigError("head_forward: empty trace");
  Tensor hidden = trace.hidden_states.back();
  if (hidden.ndim() != 3 || hidden.dim(2) != head.proj_w.dim(0)) {
    throw ShapeError("head_forward: hidden dim does not match head projection");
  }
  Tensor pooled = head.kind == HeadKind::kSequenceClassification
                      ? take_position(hidden, 0)  // [CLS]
                      : hidden;
  if (opts.train && head.dropout_prob > 0.0) {
    if (!opts.rng) throw ConfigError("head_forward: train mode needs an rng");
    pooled = dropout(pooled, head.dropout_prob, *opts.rng, true);
  }
  return add_bias(matmul(pooled, head.proj_w), head.proj_b);
}

Tensor sequence_classification_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ShapeError("sequence_classification_loss: expects [batch, labels]");
  if (labels.size() != static_cast<std::size_t>(logits.dim(0))) {
    throw ShapeError("sequence_classification_loss: label count mismatch");
  }
  const int num_labels = logits.dim(1);
  for (int y : labels) {
    if (y < 0 || y >= num_labels) {
      throw ConfigError("sequence_classification_loss: label out of range");
    }
  }
  // Reuse the reference cross-entropy per example row.
  Tensor total = Tensor::zeros({1});
  std::vector<double> one_hot(static_cast<std::size_t>(num_labels), 0.0);
  for (int b = 0; b < logits.dim(0); ++b) {
    std::fill(one_hot.begin(), one_hot.end(), 0.0);
    one_hot[static_cast<std::size_t>(labels[static_cast<std::size_t>(b)])] = 1.0;
    Tensor row = take_position(reshape(logits, {1, logits.dim(0), num_labels}), b);
    total = add(total, cross_entropy(reshape(row, {num_labels}),
                                     Tensor::from_vector({num_labels}, one_hot)));
  }
  return scale(total, 1.0 / logits.dim(0));
}

}  // namespace rd
