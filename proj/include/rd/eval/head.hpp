#pragma once

#include <random>
#include <string>
#include <vector>

#include "rd/model/forward.hpp"
#include "rd/numerics/tensor.hpp"

namespace rd {

enum class HeadKind { kSequenceClassification, kTokenClassification };

HeadKind head_kind_from_string(const std::string& s);
std::string to_string(HeadKind k);

// Linear projection head over encoder outputs.
struct TaskHead {
  HeadKind kind = HeadKind::kSequenceClassification;
  int num_labels = 2;
  Tensor proj_w;  // d x num_labels
  Tensor proj_b;  // num_labels
  double dropout_prob = 0.1;
};

TaskHead init_task_head(HeadKind kind, int hidden_dim, int num_labels, std::mt19937_64& rng);

std::vector<NamedParam> collect_params(const TaskHead& head);

// Sequence kind pools the [CLS] position -> [B, num_labels]; token kind
// projects every position -> [B, N, num_labels].
Tensor head_forward(const ForwardTrace& trace, const TaskHead& head,
                    const ForwardOptions& opts = {});

// Mean cross-entropy for sequence-classification logits [B, num_labels].
Tensor sequence_classification_loss(const Tensor& logits, const std::vector<int>& labels);

// Labelled examples; tags use -1 at positions excluded from the loss
// ([CLS]/[SEP]/[PAD]).
struct ClassificationExample {
  std::vector<int> tokens;
  std::vector<uint8_t> valid;
  int label = 0;
};

struct TaggingExample {
  std::vector<int> tokens;
  std::vector<uint8_t> valid;
  std::vector<int> tags;
};

struct TaskDataset {
  HeadKind kind = HeadKind::kSequenceClassification;
  int num_labels = 2;
  std::vector<std::string> label_names;
  std::vector<ClassificationExample> classification;
  std::vector<TaggingExample> tagging;

  std::size_t size() const {
    return kind == HeadKind::kSequenceClassification ? classification.size() : tagging.size();
  }
};

}  // namespace rd
