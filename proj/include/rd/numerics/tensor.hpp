#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rd {

using Shape = std::vector<int>;

std::string shape_to_string(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense n-d array of doubles with an optional same-shape gradient buffer.
// Copies are shallow: they share both the value and gradient storage, so a
// Tensor held inside a parameter struct and a copy captured by a backward
// closure refer to the same numbers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);
  static Tensor identity(int n, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  std::size_t numel() const { return data_ ? data_->size() : 0; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  // Gradient storage is shared between shallow copies, so it is writable
  // even through a const handle.
  double* grad() const;
  bool has_grad() const { return grad_ != nullptr; }

  // The flag is shared between shallow copies, so freezing a parameter is
  // visible through every handle to it. Toggling on allocates a zero
  // gradient buffer; toggling off keeps the buffer but stops tracking.
  bool requires_grad() const { return requires_grad_ && *requires_grad_; }
  void set_requires_grad(bool rg);
  void zero_grad() const;

  // Scalar access, valid only for single-element tensors.
  double value() const;

  double at(std::initializer_list<int> idx) const;
  double& at(std::initializer_list<int> idx);

  // True when two tensors refer to the same value storage.
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  // Deep copy with fresh buffers.
  Tensor clone() const;

  std::vector<double>& vec() { return *data_; }
  const std::vector<double>& vec() const { return *data_; }

 private:
  std::size_t flat_index(std::initializer_list<int> idx) const;

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
  std::shared_ptr<bool> requires_grad_;
};

// Raised on malformed shapes or mismatched operands.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

void check_finite(const Tensor& t, const char* op_name);

}  // namespace rd
