#include "rd/numerics/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace rd {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_to_string(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, bool requires_grad) : shape_(std::move(shape)) {
  data_ = std::make_shared<std::vector<double>>(shape_numel(shape_), 0.0);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.data_->begin(), t.data_->end(), value);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("from_vector: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_to_string(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : *t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::identity(int n, bool requires_grad) {
  Tensor t({n, n}, requires_grad);
  for (int i = 0; i < n; ++i) (*t.data_)[static_cast<std::size_t>(i) * n + i] = 1.0;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_vector({1}, {v}, requires_grad);
}

int Tensor::dim(int i) const {
  if (i < 0) i += ndim();
  if (i < 0 || i >= ndim()) throw ShapeError("dim index out of range");
  return shape_[static_cast<std::size_t>(i)];
}

double* Tensor::grad() const {
  if (!grad_) throw std::runtime_error("tensor has no gradient buffer");
  return grad_->data();
}

void Tensor::set_requires_grad(bool rg) {
  if (!requires_grad_) {
    requires_grad_ = std::make_shared<bool>(rg);
  } else {
    *requires_grad_ = rg;
  }
  if (rg && !grad_) {
    grad_ = std::make_shared<std::vector<double>>(numel(), 0.0);
  }
}

void Tensor::zero_grad() const {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor is not a scalar");
  return (*data_)[0];
}

std::size_t Tensor::flat_index(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != ndim()) throw ShapeError("at(): rank mismatch");
  std::size_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    if (i < 0 || i >= shape_[static_cast<std::size_t>(axis)]) throw ShapeError("at(): index out of range");
    flat = flat * static_cast<std::size_t>(shape_[static_cast<std::size_t>(axis)]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<int> idx) const { return (*data_)[flat_index(idx)]; }
double& Tensor::at(std::initializer_list<int> idx) { return (*data_)[flat_index(idx)]; }

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  t.set_requires_grad(requires_grad());
  if (grad_ && t.grad_) *t.grad_ = *grad_;
  return t;
}

void check_finite(const Tensor& t, const char* op_name) {
#ifndef NDEBUG
  for (double v : t.vec()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by ") + op_name);
    }
  }
#else
  (void)t;
  (void)op_name;
#endif
}

}  // namespace rd
