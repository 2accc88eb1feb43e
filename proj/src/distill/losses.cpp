#include "rd/distill/losses.hpp"

#include <cmath>
#include <sstream>

#include "rd/common/errors.hpp"
#include "rd/common/log.hpp"
#include "rd/numerics/ops.hpp"
#include "rd/numerics/tape.hpp"

namespace rd {

namespace {

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Stable log-softmax of row[0..n) into out[0..n).
void log_softmax_row(const double* row, std::size_t n, double* out) {
  double mx = row[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  double lse = 0.0;
  for (std::size_t i = 0; i < n; ++i) lse += std::exp(row[i] - mx);
  lse = std::log(lse) + mx;
  for (std::size_t i = 0; i < n; ++i) out[i] = row[i] - lse;
}

}  // namespace

AlignmentMode alignment_mode_from_string(const std::string& s) {
  if (s == "full") return AlignmentMode::kFull;
  if (s == "hidden" || s == "hidden_only") return AlignmentMode::kHiddenOnly;
  if (s == "attention" || s == "attention_only") return AlignmentMode::kAttentionOnly;
  if (s == "none") return AlignmentMode::kNone;
  throw ConfigError("unknown alignment mode: " + s);
}

std::string to_string(AlignmentMode m) {
  switch (m) {
    case AlignmentMode::kFull: return "full";
    case AlignmentMode::kHiddenOnly: return "hidden";
    case AlignmentMode::kAttentionOnly: return "attention";
    case AlignmentMode::kNone: return "none";
  }
  return "?";
}

Tensor mlm_loss(const Tensor& logits, const std::vector<int>& labels, bool raw_sums) {
  if (logits.ndim() != 3) throw ShapeError("mlm_loss: logits must be [batch, seq, vocab]");
  const int batch = logits.dim(0), seq = logits.dim(1), vocab = logits.dim(2);
  const std::size_t positions = static_cast<std::size_t>(batch) * seq;
  if (labels.size() != positions) throw ShapeError("mlm_loss: label count mismatch");

  std::size_t count = 0;
  for (int y : labels) {
    if (y == DistillBatch::kLabelNone) continue;
    if (y < 0 || y >= vocab) throw ShapeError("mlm_loss: label id out of range");
    ++count;
  }
  const bool rg = tracing({&logits});
  Tensor out = Tensor::zeros({1}, rg);
  if (count == 0) {
    log_warn("mlm_loss: batch has no masked positions, returning 0");
    return out;
  }
  const double norm = raw_sums ? 1.0 : static_cast<double>(count);

  double acc = 0.0;
  std::vector<double> log_p(static_cast<std::size_t>(vocab));
  for (std::size_t pos = 0; pos < positions; ++pos) {
    const int y = labels[pos];
    if (y == DistillBatch::kLabelNone) continue;
    const double* row = logits.data() + pos * vocab;
    log_softmax_row(row, static_cast<std::size_t>(vocab), log_p.data());
    acc -= log_p[static_cast<std::size_t>(y)];
  }
  out.data()[0] = acc / norm;

  if (rg) {
    Tape::active()->record([logits, labels, out, positions, vocab, norm]() mutable {
      const double g = out.grad()[0] / norm;
      std::vector<double> log_p(static_cast<std::size_t>(vocab));
      for (std::size_t pos = 0; pos < positions; ++pos) {
        const int y = labels[pos];
        if (y == DistillBatch::kLabelNone) continue;
        const double* row = logits.data() + pos * vocab;
        double* grow = logits.grad() + pos * vocab;
        log_softmax_row(row, static_cast<std::size_t>(vocab), log_p.data());
        for (int i = 0; i < vocab; ++i) {
          grow[i] += g * std::exp(log_p[static_cast<std::size_t>(i)]);
        }
        grow[y] -= g;
      }
    });
  }
  return out;
}

Tensor attention_alignment_loss(const Tensor& student_map, const Tensor& teacher_map,
                                const std::vector<uint8_t>& valid, bool teacher_first) {
  if (student_map.ndim() != 4 || teacher_map.ndim() != 4) {
    throw ShapeError("attention_alignment_loss: maps must be [batch, heads, seq, seq]");
  }
  if (student_map.dim(1) != teacher_map.dim(1)) {
    throw ConfigError("attention_alignment_loss: head count mismatch (" +
                      std::to_string(student_map.dim(1)) + " vs " +
                      std::to_string(teacher_map.dim(1)) + ")");
  }
  if (student_map.shape() != teacher_map.shape()) {
    throw ShapeError("attention_alignment_loss: shape mismatch");
  }
  const int batch = student_map.dim(0), heads = student_map.dim(1), seq = student_map.dim(2);
  if (valid.size() != static_cast<std::size_t>(batch) * seq) {
    throw ShapeError("attention_alignment_loss: validity mask size mismatch");
  }

  // Per-example weight 1/(B*H*N'_b); examples with no valid rows contribute 0.
  std::vector<double> weight(static_cast<std::size_t>(batch), 0.0);
  for (int b = 0; b < batch; ++b) {
    int nv = 0;
    for (int n = 0; n < seq; ++n) nv += valid[static_cast<std::size_t>(b) * seq + n] ? 1 : 0;
    if (nv > 0) weight[static_cast<std::size_t>(b)] = 1.0 / (static_cast<double>(batch) * heads * nv);
  }

  const Tensor& p_map = teacher_first ? teacher_map : student_map;
  const Tensor& q_map = teacher_first ? student_map : teacher_map;
  const bool rg = tracing({&student_map, &teacher_map});
  Tensor out = Tensor::zeros({1}, rg);

  double acc = 0.0;
  for (int b = 0; b < batch; ++b) {
    if (weight[static_cast<std::size_t>(b)] == 0.0) continue;
    for (int h = 0; h < heads; ++h) {
      for (int n = 0; n < seq; ++n) {
        if (!valid[static_cast<std::size_t>(b) * seq + n]) continue;
        const std::size_t base =
            ((static_cast<std::size_t>(b) * heads + h) * seq + n) * seq;
        double row_kl = 0.0;
        for (int k = 0; k < seq; ++k) {
          const double pv = p_map.data()[base + k];
          if (pv <= 0.0) continue;
          const double qv = std::max(q_map.data()[base + k], kKlEps);
          row_kl += pv * (std::log(pv) - std::log(qv));
        }
        acc += weight[static_cast<std::size_t>(b)] * row_kl;
      }
    }
  }
  out.data()[0] = acc;

  if (rg) {
    Tensor p = p_map, q = q_map;
    Tape::active()->record([p, q, out, valid, weight, batch, heads, seq]() mutable {
      const double g = out.grad()[0];
      for (int b = 0; b < batch; ++b) {
        const double w = weight[static_cast<std::size_t>(b)];
        if (w == 0.0) continue;
        for (int h = 0; h < heads; ++h) {
          for (int n = 0; n < seq; ++n) {
            if (!valid[static_cast<std::size_t>(b) * seq + n]) continue;
            const std::size_t base =
                ((static_cast<std::size_t>(b) * heads + h) * seq + n) * seq;
            for (int k = 0; k < seq; ++k) {
              const double pv = p.data()[base + k];
              const double qv = std::max(q.data()[base + k], kKlEps);
              if (p.requires_grad() && pv > 0.0) {
                p.grad()[base + k] += g * w * (std::log(pv) - std::log(qv) + 1.0);
              }
              if (q.requires_grad() && q.data()[base + k] > kKlEps) {
                q.grad()[base + k] += g * w * (-pv / qv);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Shared core of the hidden-state and embedding cosine losses:
// (1/B) sum_b (1/N'_b) sum_{n valid} (1 - cos(u_n, v_n)).
Tensor cosine_distance_loss(const Tensor& u, const Tensor& v,
                            const std::vector<uint8_t>& valid, const char* op_name) {
  if (u.ndim() != 3 || u.shape() != v.shape()) {
    throw ShapeError(std::string(op_name) + ": expects matching [batch, seq, dim] inputs");
  }
  const int batch = u.dim(0), seq = u.dim(1), dim = u.dim(2);
  if (valid.size() != static_cast<std::size_t>(batch) * seq) {
    throw ShapeError(std::string(op_name) + ": validity mask size mismatch");
  }

  std::vector<double> weight(static_cast<std::size_t>(batch), 0.0);
  for (int b = 0; b < batch; ++b) {
    int nv = 0;
    for (int n = 0; n < seq; ++n) nv += valid[static_cast<std::size_t>(b) * seq + n] ? 1 : 0;
    if (nv > 0) weight[static_cast<std::size_t>(b)] = 1.0 / (static_cast<double>(batch) * nv);
  }

  const bool rg = tracing({&u, &v});
  Tensor out = Tensor::zeros({1}, rg);
  double acc = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double w = weight[static_cast<std::size_t>(b)];
    if (w == 0.0) continue;
    for (int n = 0; n < seq; ++n) {
      if (!valid[static_cast<std::size_t>(b) * seq + n]) continue;
      const std::size_t base = (static_cast<std::size_t>(b) * seq + n) * dim;
      double dot = 0.0, nu = 0.0, nv = 0.0;
      for (int i = 0; i < dim; ++i) {
        dot += u.data()[base + i] * v.data()[base + i];
        nu += u.data()[base + i] * u.data()[base + i];
        nv += v.data()[base + i] * v.data()[base + i];
      }
      double cosv = 0.0;
      if (nu == 0.0 || nv == 0.0) {
        log_warn(std::string(op_name) + ": zero-norm vector, cosine treated as 0");
      } else {
        cosv = dot / (std::sqrt(nu) * std::sqrt(nv));
      }
      acc += w * (1.0 - cosv);
    }
  }
  out.data()[0] = acc;

  if (rg) {
    Tape::active()->record([u, v, out, valid, weight, batch, seq, dim]() mutable {
      const double g = out.grad()[0];
      for (int b = 0; b < batch; ++b) {
        const double w = weight[static_cast<std::size_t>(b)];
        if (w == 0.0) continue;
        for (int n = 0; n < seq; ++n) {
          if (!valid[static_cast<std::size_t>(b) * seq + n]) continue;
          const std::size_t base = (static_cast<std::size_t>(b) * seq + n) * dim;
          double dot = 0.0, nu = 0.0, nv = 0.0;
          for (int i = 0; i < dim; ++i) {
            dot += u.data()[base + i] * v.data()[base + i];
            nu += u.data()[base + i] * u.data()[base + i];
            nv += v.data()[base + i] * v.data()[base + i];
          }
          if (nu == 0.0 || nv == 0.0) continue;  // flat spot: cosine pinned to 0
          const double nrm_u = std::sqrt(nu), nrm_v = std::sqrt(nv);
          const double cosv = dot / (nrm_u * nrm_v);
          const double gw = -g * w;  // d(1 - cos)/dcos = -1
          for (int i = 0; i < dim; ++i) {
            if (u.requires_grad()) {
              u.grad()[base + i] +=
                  gw * (v.data()[base + i] / (nrm_u * nrm_v) - cosv * u.data()[base + i] / nu);
            }
            if (v.requires_grad()) {
              v.grad()[base + i] +=
                  gw * (u.data()[base + i] / (nrm_u * nrm_v) - cosv * v.data()[base + i] / nv);
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor hidden_alignment_loss(const Tensor& student_hidden, const Tensor& teacher_hidden,
                             const std::vector<uint8_t>& valid) {
  return cosine_distance_loss(student_hidden, teacher_hidden, valid, "hidden_alignment_loss");
}

Tensor embedding_loss(const Tensor& student_embed, const Tensor& teacher_embed) {
  if (student_embed.ndim() != 3) {
    throw ShapeError("embedding_loss: expects [batch, seq, dim]");
  }
  const std::vector<uint8_t> all_valid(
      static_cast<std::size_t>(student_embed.dim(0)) * student_embed.dim(1), 1);
  return cosine_distance_loss(student_embed, teacher_embed, all_valid, "embedding_loss");
}

Tensor alignment_loss(const ForwardTrace& student, const ForwardTrace& teacher,
                      const LayerMap& map, const std::vector<uint8_t>& valid,
                      const LossWeights& weights, AlignBreakdown* breakdown) {
  if (breakdown) breakdown->clear();
  if (weights.alignment_mode == AlignmentMode::kNone) {
    return Tensor::zeros({1});
  }
  map.validate();
  const int ls = map.student_iterations;
  if (static_cast<int>(student.attention_maps.size()) < ls ||
      static_cast<int>(student.hidden_states.size()) < ls + 1) {
    throw ConfigError("alignment_loss: student trace shorter than layer map");
  }
  if (static_cast<int>(teacher.attention_maps.size()) < map.mapping.back() ||
      static_cast<int>(teacher.hidden_states.size()) < map.mapping.back() + 1) {
    throw ConfigError("alignment_loss: layer map exceeds teacher trace");
  }

  const bool use_att = weights.alignment_mode != AlignmentMode::kHiddenOnly;
  const bool use_hidden = weights.alignment_mode != AlignmentMode::kAttentionOnly;
  Tensor total = Tensor::zeros({1});
  for (int l = 1; l <= ls; ++l) {
    const int t = map.mapping[static_cast<std::size_t>(l - 1)];
    double att_v = 0.0, hid_v = 0.0;
    if (use_att) {
      Tensor att = attention_alignment_loss(student.attention_maps[static_cast<std::size_t>(l - 1)],
                                            teacher.attention_maps[static_cast<std::size_t>(t - 1)],
                                            valid, weights.teacher_first_kl);
      att_v = att.value();
      total = add(total, att);
    }
    if (use_hidden) {
      Tensor hid = hidden_alignment_loss(student.hidden_states[static_cast<std::size_t>(l)],
                                         teacher.hidden_states[static_cast<std::size_t>(t)], valid);
      hid_v = hid.value();
      total = add(total, hid);
    }
    if (breakdown) breakdown->emplace_back(att_v, hid_v);
  }
  if (weights.mean_over_layers) total = scale(total, 1.0 / ls);
  return total;
}

Tensor output_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   const std::vector<uint8_t>& mask, bool raw_sums, bool teacher_first) {
  if (student_logits.ndim() != 3 || student_logits.shape() != teacher_logits.shape()) {
    throw ShapeError("output_loss: expects matching [batch, seq, vocab] logits");
  }
  const int batch = student_logits.dim(0), seq = student_logits.dim(1);
  const int vocab = student_logits.dim(2);
  const std::size_t positions = static_cast<std::size_t>(batch) * seq;
  if (mask.size() != positions) throw ShapeError("output_loss: mask size mismatch");

  std::size_t count = 0;
  for (uint8_t m : mask) count += m ? 1 : 0;
  const bool rg = tracing({&student_logits, &teacher_logits});
  Tensor out = Tensor::zeros({1}, rg);
  if (count == 0) {
    log_warn("output_loss: no masked positions, returning 0");
    return out;
  }
  const double norm = raw_sums ? 1.0 : static_cast<double>(count);

  // p is the first KL argument's distribution, q the second's.
  const Tensor& p_logits = teacher_first ? teacher_logits : student_logits;
  const Tensor& q_logits = teacher_first ? student_logits : teacher_logits;

  double acc = 0.0;
  std::vector<double> lp(static_cast<std::size_t>(vocab)), lq(static_cast<std::size_t>(vocab));
  for (std::size_t pos = 0; pos < positions; ++pos) {
    if (!mask[pos]) continue;
    log_softmax_row(p_logits.data() + pos * vocab, static_cast<std::size_t>(vocab), lp.data());
    log_softmax_row(q_logits.data() + pos * vocab, static_cast<std::size_t>(vocab), lq.data());
    for (int i = 0; i < vocab; ++i) {
      const double pv = std::exp(lp[static_cast<std::size_t>(i)]);
      if (pv <= 0.0) continue;
      const double qv = std::max(std::exp(lq[static_cast<std::size_t>(i)]), kKlEps);
      acc += pv * (lp[static_cast<std::size_t>(i)] - std::log(qv));
    }
  }
  out.data()[0] = acc / norm;

  if (rg) {
    Tensor p = p_logits, q = q_logits;
    Tape::active()->record([p, q, out, mask, positions, vocab, norm]() mutable {
      const double g = out.grad()[0] / norm;
      std::vector<double> lp(static_cast<std::size_t>(vocab)), lq(static_cast<std::size_t>(vocab));
      for (std::size_t pos = 0; pos < positions; ++pos) {
        if (!mask[pos]) continue;
        log_softmax_row(p.data() + pos * vocab, static_cast<std::size_t>(vocab), lp.data());
        log_softmax_row(q.data() + pos * vocab, static_cast<std::size_t>(vocab), lq.data());
        double row_kl = 0.0;
        for (int i = 0; i < vocab; ++i) {
          const double pv = std::exp(lp[static_cast<std::size_t>(i)]);
          if (pv <= 0.0) continue;
          const double qv = std::max(std::exp(lq[static_cast<std::size_t>(i)]), kKlEps);
          row_kl += pv * (lp[static_cast<std::size_t>(i)] - std::log(qv));
        }
        for (int i = 0; i < vocab; ++i) {
          const double pv = std::exp(lp[static_cast<std::size_t>(i)]);
          const double qv = std::exp(lq[static_cast<std::size_t>(i)]);
          if (p.requires_grad() && pv > 0.0) {
            const double qc = std::max(qv, kKlEps);
            p.grad()[pos * vocab + i] +=
                g * pv * (lp[static_cast<std::size_t>(i)] - std::log(qc) - row_kl);
          }
          if (q.requires_grad()) {
            q.grad()[pos * vocab + i] += g * (qv - pv);
          }
        }
      }
    });
  }
  return out;
}

LossReport total_loss(const DistillBatch& batch, const ForwardTrace& student,
                      const ForwardTrace& teacher, const LossWeights& weights,
                      const LayerMap& map) {
  if (weights.lambda_mlm < 0.0 || weights.lambda_align < 0.0 || weights.lambda_out < 0.0) {
    throw ConfigError("loss weights must be nonnegative");
  }
  LossReport report;

  Tensor mlm = mlm_loss(student.final_logits, batch.labels, weights.raw_sums);
  Tensor align = alignment_loss(student, teacher, map, batch.valid, weights, &report.per_layer);
  Tensor out = output_loss(student.final_logits, teacher.final_logits, batch.mask,
                           weights.raw_sums, weights.teacher_first_kl);

  Tensor total = add(add(scale(mlm, weights.lambda_mlm), scale(align, weights.lambda_align)),
                     scale(out, weights.lambda_out));
  if (weights.embed_loss_enabled) {
    Tensor embed = embedding_loss(student.hidden_states.front(), teacher.hidden_states.front());
    report.embed = embed.value();
    total = add(total, embed);
  }

  report.mlm = mlm.value();
  report.align = align.value();
  report.out = out.value();
  for (const auto& [a, h] : report.per_layer) {
    report.att += a;
    report.hidden += h;
  }
  report.total = total.value();
  report.total_tensor = total;
  return report;
}

std::string LossReport::to_log_line(long long step) const {
  std::ostringstream os;
  os.precision(10);
  os << "step=" << step << " mlm=" << mlm << " att=" << att << " hidden=" << hidden
     << " align=" << align << " out=" << out << " embed=" << embed << " total=" << total;
  return os.str();
}

}  // namespace rd
