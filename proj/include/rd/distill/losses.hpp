#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rd/data/batch.hpp"
#include "rd/distill/layer_map.hpp"
#include "rd/model/forward.hpp"
#include "rd/numerics/tensor.hpp"

namespace rd {

enum class AlignmentMode { kFull, kHiddenOnly, kAttentionOnly, kNone };

AlignmentMode alignment_mode_from_string(const std::string& s);
std::string to_string(AlignmentMode m);

struct LossWeights {
  double lambda_mlm = 1.0;
  double lambda_align = 3.0;
  double lambda_out = 5.0;
  AlignmentMode alignment_mode = AlignmentMode::kFull;
  bool embed_loss_enabled = false;
  // Literal per-position sums for the MLM and output terms instead of the
  // default division by the masked-position count.
  bool raw_sums = false;
  // Divide the layer alignment sum by the number of iterations.
  bool mean_over_layers = false;
  // Swap the KL argument order to the teacher-first convention.
  bool teacher_first_kl = false;
};

// Per-layer alignment contributions: (attention, hidden) for each iteration.
using AlignBreakdown = std::vector<std::pair<double, double>>;

struct LossReport {
  double mlm = 0.0;
  double att = 0.0;
  double hidden = 0.0;
  double align = 0.0;
  double out = 0.0;
  double embed = 0.0;
  double total = 0.0;
  AlignBreakdown per_layer;
  // Scalar tensor connected to the student graph; backward through it
  // produces gradients for every weighted term.
  Tensor total_tensor;

  std::string to_log_line(long long step) const;
};

// Cross-entropy at labelled positions of logits [B, N, V]. labels is laid
// out batch x seq with DistillBatch::kLabelNone at unlabelled positions.
// Divides by the labelled count unless raw_sums; no labels -> 0 with warning.
Tensor mlm_loss(const Tensor& logits, const std::vector<int>& labels,
                bool raw_sums = false);

// Mean per-row KL between attention maps [B, H, N, N] over valid query rows,
// student map first unless teacher_first. valid is laid out batch x seq.
Tensor attention_alignment_loss(const Tensor& student_map, const Tensor& teacher_map,
                                const std::vector<uint8_t>& valid,
                                bool teacher_first = false);

// Mean (1 - cosine) between hidden states [B, N, d] over valid positions.
Tensor hidden_alignment_loss(const Tensor& student_hidden, const Tensor& teacher_hidden,
                             const std::vector<uint8_t>& valid);

// Sum over student iterations of the mode-selected attention and hidden
// terms, each student layer compared against its mapped teacher layer.
Tensor alignment_loss(const ForwardTrace& student, const ForwardTrace& teacher,
                      const LayerMap& map, const std::vector<uint8_t>& valid,
                      const LossWeights& weights, AlignBreakdown* breakdown = nullptr);

// Masked-position KL between output distributions, softmax applied
// internally to both logit sets [B, N, V]. mask is laid out batch x seq.
Tensor output_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   const std::vector<uint8_t>& mask, bool raw_sums = false,
                   bool teacher_first = false);

// Mean (1 - cosine) between embedding-layer outputs over all positions.
Tensor embedding_loss(const Tensor& student_embed, const Tensor& teacher_embed);

LossReport total_loss(const DistillBatch& batch, const ForwardTrace& student,
                      const ForwardTrace& teacher, const LossWeights& weights,
                      const LayerMap& map);

}  // namespace rd
