#include "rd/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rd/common/log.hpp"

namespace rd {

namespace {

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

constexpr double kMaskValue = -1e30;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool rg = tracing({&a, &b});
  Tensor out(a.shape(), rg);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (rg) {
    Tape::active()->record([a, b, out]() mutable {
      const std::size_t n = out.numel();
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const bool rg = tracing({&a, &b});
  Tensor out(a.shape(), rg);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (rg) {
    Tape::active()->record([a, b, out]() mutable {
      const std::size_t n = out.numel();
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] -= out.grad()[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool rg = tracing({&a, &b});
  Tensor out(a.shape(), rg);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (rg) {
    Tape::active()->record([a, b, out]() mutable {
      const std::size_t n = out.numel();
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i] * b.data()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i] * a.data()[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  const bool rg = tracing({&x});
  Tensor out(x.shape(), rg);
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;
  if (rg) {
    Tape::active()->record([x, out, c]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i] * c;
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.ndim() != 1 || x.ndim() < 1 || x.dim(-1) != b.dim(0)) {
    throw ShapeError("add_bias: bias length must equal last dim of x");
  }
  const bool rg = tracing({&x, &b});
  Tensor out(x.shape(), rg);
  const std::size_t d = static_cast<std::size_t>(b.dim(0));
  const std::size_t rows = x.numel() / d;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j)
      out.data()[r * d + j] = x.data()[r * d + j] + b.data()[j];
  if (rg) {
    Tape::active()->record([x, b, out, rows, d]() mutable {
      if (x.requires_grad()) {
        const std::size_t n = out.numel();
        for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i];
      }
      if (b.requires_grad()) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) b.grad()[j] += out.grad()[r * d + j];
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.ndim() < 2 || b.ndim() < 2) throw ShapeError("matmul: operands must have rank >= 2");
  const int m = a.dim(-2);
  const int k = a.dim(-1);
  const int bk = transpose_b ? b.dim(-1) : b.dim(-2);
  const int n = transpose_b ? b.dim(-2) : b.dim(-1);
  if (bk != k) {
    throw ShapeError("matmul: inner dims differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const bool shared_b = b.ndim() == 2;
  const std::size_t batch = a.numel() / (static_cast<std::size_t>(m) * k);
  if (!shared_b) {
    Shape lead_a(a.shape().begin(), a.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (lead_a != lead_b) throw ShapeError("matmul: leading dims of operands differ");
  }

  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  const bool rg = tracing({&a, &b});
  Tensor out(out_shape, rg);

  const std::size_t a_stride = static_cast<std::size_t>(m) * k;
  const std::size_t b_stride = shared_b ? 0 : static_cast<std::size_t>(k) * n;
  const std::size_t o_stride = static_cast<std::size_t>(m) * n;

  for (std::size_t p = 0; p < batch; ++p) {
    const double* A = a.data() + p * a_stride;
    const double* B = b.data() + p * b_stride;
    double* O = out.data() + p * o_stride;
    if (!transpose_b) {
      for (int i = 0; i < m; ++i) {
        double* orow = O + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
          const double av = A[static_cast<std::size_t>(i) * k + kk];
          if (av == 0.0) continue;
          const double* brow = B + static_cast<std::size_t>(kk) * n;
          for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      }
    } else {
      for (int i = 0; i < m; ++i) {
        const double* arow = A + static_cast<std::size_t>(i) * k;
        double* orow = O + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          const double* brow = B + static_cast<std::size_t>(j) * k;
          double acc = 0.0;
          for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
          orow[j] = acc;
        }
      }
    }
  }

  if (rg) {
    Tape::active()->record([a, b, out, transpose_b, m, n, k, batch, a_stride, b_stride,
                            o_stride]() mutable {
      for (std::size_t p = 0; p < batch; ++p) {
        const double* A = a.data() + p * a_stride;
        const double* B = b.data() + p * b_stride;
        const double* G = out.grad() + p * o_stride;
        double* dA = a.requires_grad() ? a.grad() + p * a_stride : nullptr;
        double* dB = b.requires_grad() ? b.grad() + p * b_stride : nullptr;
        if (!transpose_b) {
          // dA[i,kk] += sum_j G[i,j] B[kk,j]; dB[kk,j] += sum_i A[i,kk] G[i,j]
          for (int i = 0; i < m; ++i) {
            const double* grow = G + static_cast<std::size_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
              const double* brow = B + static_cast<std::size_t>(kk) * n;
              if (dA) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                dA[static_cast<std::size_t>(i) * k + kk] += acc;
              }
              if (dB) {
                const double av = A[static_cast<std::size_t>(i) * k + kk];
                if (av != 0.0) {
                  double* dbrow = dB + static_cast<std::size_t>(kk) * n;
                  for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                }
              }
            }
          }
        } else {
          // out[i,j] = sum_kk A[i,kk] B[j,kk]
          for (int i = 0; i < m; ++i) {
            const double* grow = G + static_cast<std::size_t>(i) * n;
            const double* arow = A + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
              const double g = grow[j];
              if (g == 0.0) continue;
              const double* brow = B + static_cast<std::size_t>(j) * k;
              if (dA) {
                double* darow = dA + static_cast<std::size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) darow[kk] += g * brow[kk];
              }
              if (dB) {
                double* dbrow = dB + static_cast<std::size_t>(j) * k;
                for (int kk = 0; kk < k; ++kk) dbrow[kk] += g * arow[kk];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: element count mismatch for " + shape_to_string(new_shape));
  }
  // Copying keeps grad flow simple; shapes here are small.
  const bool rg = tracing({&x});
  Tensor out(new_shape, rg);
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (rg) {
    Tape::active()->record([x, out]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

namespace {

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[static_cast<std::size_t>(i)] =
        st[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(s[static_cast<std::size_t>(i) + 1]);
  return st;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int nd = x.ndim();
  if (static_cast<int>(perm.size()) != nd) throw ShapeError("permute: rank mismatch");
  Shape out_shape(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) out_shape[static_cast<std::size_t>(i)] = x.dim(perm[static_cast<std::size_t>(i)]);
  const bool rg = tracing({&x});
  Tensor out(out_shape, rg);

  const auto in_strides = strides_of(x.shape());
  std::vector<std::size_t> gather(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) gather[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];

  const std::size_t total = x.numel();
  // Map each output flat index to the source flat index once, reuse for backward.
  auto src_index = std::make_shared<std::vector<std::size_t>>(total);
  std::vector<int> idx(static_cast<std::size_t>(nd), 0);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t s = 0;
    for (int i = 0; i < nd; ++i) s += static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * gather[static_cast<std::size_t>(i)];
    (*src_index)[o] = s;
    out.data()[o] = x.data()[s];
    for (int i = nd - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < out_shape[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  if (rg) {
    Tape::active()->record([x, out, src_index]() mutable {
      const std::size_t total = out.numel();
      for (std::size_t o = 0; o < total; ++o) x.grad()[(*src_index)[o]] += out.grad()[o];
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim()) throw ShapeError("softmax: invalid axis");
  const std::size_t axis_len = static_cast<std::size_t>(x.dim(axis));
  const auto strides = strides_of(x.shape());
  const std::size_t axis_stride = strides[static_cast<std::size_t>(axis)];
  const std::size_t total = x.numel();
  const std::size_t n_rows = total / axis_len;

  const bool rg = tracing({&x});
  Tensor out(x.shape(), rg);

  auto row_base = [axis_stride, axis_len](std::size_t row) {
    const std::size_t outer = row / axis_stride;
    const std::size_t inner = row % axis_stride;
    return outer * axis_stride * axis_len + inner;
  };

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t base = row_base(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < axis_len; ++i) mx = std::max(mx, x.data()[base + i * axis_stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < axis_len; ++i) {
      const double e = std::exp(x.data()[base + i * axis_stride] - mx);
      out.data()[base + i * axis_stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < axis_len; ++i) out.data()[base + i * axis_stride] /= sum;
  }
  check_finite(out, "softmax");

  if (rg) {
    Tape::active()->record([x, out, n_rows, axis_len, axis_stride, row_base]() mutable {
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t base = row_base(r);
        double dot = 0.0;
        for (std::size_t i = 0; i < axis_len; ++i)
          dot += out.data()[base + i * axis_stride] * out.grad()[base + i * axis_stride];
        for (std::size_t i = 0; i < axis_len; ++i) {
          const std::size_t at = base + i * axis_stride;
          x.grad()[at] += out.data()[at] * (out.grad()[at] - dot);
        }
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  const bool rg = tracing({&x});
  Tensor out(x.shape(), rg);
  const std::size_t n = x.numel();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  if (rg) {
    Tape::active()->record([x, out]() mutable {
      const std::size_t n = out.numel();
      constexpr double inv_sqrt2 = 0.7071067811865475244;
      constexpr double inv_sqrt_2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = x.data()[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        x.grad()[i] += out.grad()[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  const bool rg = tracing({&x});
  Tensor out(x.shape(), rg);
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  if (rg) {
    Tape::active()->record([x, out]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i)
        if (x.data()[i] > 0.0) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.ndim() < 1) throw ShapeError("layer_norm: rank must be >= 1");
  const int d = x.dim(-1);
  if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != d || bias.dim(0) != d) {
    throw ShapeError("layer_norm: gain/bias length must equal last dim");
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  const bool rg = tracing({&x, &gain, &bias});
  Tensor out(x.shape(), rg);
  const std::size_t D = static_cast<std::size_t>(d);
  const std::size_t rows = x.numel() / D;

  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);

  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * D;
    double mean = 0.0;
    for (std::size_t j = 0; j < D; ++j) mean += xr[j];
    mean /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(D);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (std::size_t j = 0; j < D; ++j) {
      const double h = (xr[j] - mean) * istd;
      (*xhat)[r * D + j] = h;
      out.data()[r * D + j] = gain.data()[j] * h + bias.data()[j];
    }
  }
  check_finite(out, "layer_norm");

  if (rg) {
    Tape::active()->record([x, gain, bias, out, xhat, inv_std, rows, D]() mutable {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = out.grad() + r * D;
        const double* h = xhat->data() + r * D;
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
          const double dh = g[j] * gain.data()[j];
          sum_dh += dh;
          sum_dh_h += dh * h[j];
        }
        if (x.requires_grad()) {
          const double istd = (*inv_std)[r];
          const double invD = 1.0 / static_cast<double>(D);
          double* dx = x.grad() + r * D;
          for (std::size_t j = 0; j < D; ++j) {
            const double dh = g[j] * gain.data()[j];
            dx[j] += istd * (dh - invD * sum_dh - h[j] * invD * sum_dh_h);
          }
        }
        if (gain.requires_grad())
          for (std::size_t j = 0; j < D; ++j) gain.grad()[j] += g[j] * h[j];
        if (bias.requires_grad())
          for (std::size_t j = 0; j < D; ++j) bias.grad()[j] += g[j];
      }
    });
  }
  return out;
}

Tensor add_key_padding_mask(const Tensor& scores, const std::vector<uint8_t>& valid,
                            int batch, int seq) {
  if (scores.ndim() != 4 || scores.dim(0) != batch || scores.dim(2) != seq ||
      scores.dim(3) != seq) {
    throw ShapeError("add_key_padding_mask: scores must be [B,H,N,N]");
  }
  if (static_cast<int>(valid.size()) != batch * seq) {
    throw ShapeError("add_key_padding_mask: validity size mismatch");
  }
  const bool rg = tracing({&scores});
  Tensor out(scores.shape(), rg);
  const int H = scores.dim(1);
  std::size_t i = 0;
  for (int b = 0; b < batch; ++b) {
    const uint8_t* vrow = valid.data() + static_cast<std::size_t>(b) * seq;
    for (int h = 0; h < H; ++h) {
      for (int q = 0; q < seq; ++q) {
        for (int kpos = 0; kpos < seq; ++kpos, ++i) {
          out.data()[i] = scores.data()[i] + (vrow[kpos] ? 0.0 : kMaskValue);
        }
      }
    }
  }
  if (rg) {
    Tape::active()->record([scores, out]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i) scores.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (!train || p == 0.0) return x;
  const bool rg = tracing({&x});
  Tensor out(x.shape(), rg);
  const std::size_t n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = u(rng) < p ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out.data()[i] = x.data()[i] * m;
  }
  if (rg) {
    Tape::active()->record([x, out, mask]() mutable {
      const std::size_t n = out.numel();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids, int batch, int seq) {
  if (table.ndim() != 2) throw ShapeError("embedding_lookup: table must be 2-D");
  if (static_cast<int>(ids.size()) != batch * seq) {
    throw ShapeError("embedding_lookup: ids size mismatch");
  }
  const int V = table.dim(0);
  const int d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= V) {
      throw std::invalid_argument("embedding_lookup: token id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(V) + ")");
    }
  }
  const bool rg = tracing({&table});
  Tensor out({batch, seq, d}, rg);
  const std::size_t D = static_cast<std::size_t>(d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::copy(table.data() + static_cast<std::size_t>(ids[t]) * D,
              table.data() + static_cast<std::size_t>(ids[t]) * D + D, out.data() + t * D);
  }
  if (rg) {
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    Tape::active()->record([table, out, ids_copy, D]() mutable {
      for (std::size_t t = 0; t < ids_copy->size(); ++t) {
        double* dst = table.grad() + static_cast<std::size_t>((*ids_copy)[t]) * D;
        const double* src = out.grad() + t * D;
        for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor take_position(const Tensor& x, int pos) {
  if (x.ndim() != 3) throw ShapeError("take_position: input must be [B,N,d]");
  const int B = x.dim(0), N = x.dim(1), d = x.dim(2);
  if (pos < 0 || pos >= N) throw ShapeError("take_position: position out of range");
  const bool rg = tracing({&x});
  Tensor out({B, d}, rg);
  const std::size_t D = static_cast<std::size_t>(d);
  for (int b = 0; b < B; ++b) {
    const std::size_t src = (static_cast<std::size_t>(b) * N + static_cast<std::size_t>(pos)) * D;
    std::copy(x.data() + src, x.data() + src + D, out.data() + static_cast<std::size_t>(b) * D);
  }
  if (rg) {
    Tape::active()->record([x, out, B, N, D, pos]() mutable {
      for (int b = 0; b < B; ++b) {
        const std::size_t dst = (static_cast<std::size_t>(b) * N + static_cast<std::size_t>(pos)) * D;
        for (std::size_t j = 0; j < D; ++j)
          x.grad()[dst + j] += out.grad()[static_cast<std::size_t>(b) * D + j];
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  const bool rg = tracing({&x});
  Tensor out = Tensor::zeros({1}, rg);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.data()[i];
  out.data()[0] = acc;
  if (rg) {
    Tape::active()->record([x, out]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < x.numel(); ++i) x.grad()[i] += g;
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const Tensor& one_hot) {
  require_same_shape(logits, one_hot, "cross_entropy");
  if (logits.ndim() != 1) throw ShapeError("cross_entropy: expects vectors");
  const std::size_t n = logits.numel();
  double label_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) label_sum += one_hot.data()[i];
  const bool rg = tracing({&logits});
  Tensor out = Tensor::zeros({1}, rg);
  if (label_sum == 0.0) return out;  // unmasked position contributes nothing

  double mx = logits.data()[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
  double lse = 0.0;
  for (std::size_t i = 0; i < n; ++i) lse += std::exp(logits.data()[i] - mx);
  lse = std::log(lse) + mx;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += one_hot.data()[i] * (lse - logits.data()[i]);
  out.data()[0] = loss;

  if (rg) {
    Tape::active()->record([logits, one_hot, out, lse, n]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::exp(logits.data()[i] - lse);
        logits.grad()[i] += g * (p - one_hot.data()[i]);
      }
    });
  }
  return out;
}

Tensor kl_divergence(const Tensor& p, const Tensor& q) {
  require_same_shape(p, q, "kl_divergence");
  const std::size_t n = p.numel();
  const bool rg = tracing({&p, &q});
  Tensor out = Tensor::zeros({1}, rg);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pv = p.data()[i];
    if (pv <= 0.0) continue;  // 0 * ln(0/q) = 0
    const double qv = std::max(q.data()[i], kKlEps);
    acc += pv * (std::log(pv) - std::log(qv));
  }
  out.data()[0] = acc;
  if (rg) {
    Tape::active()->record([p, q, out, n]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double pv = p.data()[i];
        const double qv = std::max(q.data()[i], kKlEps);
        if (p.requires_grad() && pv > 0.0) {
          p.grad()[i] += g * (std::log(pv) - std::log(qv) + 1.0);
        }
        if (q.requires_grad() && q.data()[i] > kKlEps) {
          q.grad()[i] += g * (-pv / qv);
        }
      }
    });
  }
  return out;
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  require_same_shape(u, v, "cosine_similarity");
  const std::size_t n = u.numel();
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += u.data()[i] * v.data()[i];
    nu += u.data()[i] * u.data()[i];
    nv += v.data()[i] * v.data()[i];
  }
  const bool rg = tracing({&u, &v});
  Tensor out = Tensor::zeros({1}, rg);
  if (nu == 0.0 || nv == 0.0) {
    log_warn("cosine_similarity: zero-norm vector, returning 0");
    return out;
  }
  const double nrm_u = std::sqrt(nu), nrm_v = std::sqrt(nv);
  const double cosv = dot / (nrm_u * nrm_v);
  out.data()[0] = cosv;
  if (rg) {
    Tape::active()->record([u, v, out, nrm_u, nrm_v, cosv, n]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < n; ++i) {
        if (u.requires_grad()) {
          u.grad()[i] += g * (v.data()[i] / (nrm_u * nrm_v) - cosv * u.data()[i] / (nrm_u * nrm_u));
        }
        if (v.requires_grad()) {
          v.grad()[i] += g * (u.data()[i] / (nrm_u * nrm_v) - cosv * v.data()[i] / (nrm_v * nrm_v));
        }
      }
    });
  }
  return out;
}

}  // namespace rd
