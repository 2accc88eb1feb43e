#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rd/numerics/tape.hpp"
#include "rd/numerics/tensor.hpp"

namespace rd {

// Differentiable tensor ops. Each op computes its output eagerly and, when a
// tape is active and an input requires grad, records a backward closure that
// accumulates additively into the inputs' gradient buffers.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);

// Broadcasts b over all leading dims of x; b length equals x's last dim.
Tensor add_bias(const Tensor& x, const Tensor& b);

// a is [..., m, k]. b is either a shared 2-D matrix or carries the same
// leading dims as a. With transpose_b, b's trailing matrix is [n, k] and the
// product contracts over k against its rows.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);

Tensor softmax(const Tensor& x, int axis);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-12);

// Adds a large negative constant to masked key columns of [B, H, N, N]
// attention scores. valid has one flag per (batch, key position).
Tensor add_key_padding_mask(const Tensor& scores, const std::vector<uint8_t>& valid,
                            int batch, int seq);

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool train);

// Gathers rows of table [V, d] for ids laid out as batch x seq.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids,
                        int batch, int seq);

// Extracts position `pos` from [B, N, d] -> [B, d].
Tensor take_position(const Tensor& x, int pos);

Tensor sum_all(const Tensor& x);

// Scalar-valued reference ops (operate on vectors, return scalar tensors).
Tensor cross_entropy(const Tensor& logits, const Tensor& one_hot);
Tensor kl_divergence(const Tensor& p, const Tensor& q);
Tensor cosine_similarity(const Tensor& u, const Tensor& v);

// Epsilon floor applied to the second KL argument (and inside logs) so that
// underflowed probabilities cannot produce infinities.
inline constexpr double kKlEps = 1e-12;

}  // namespace rd
