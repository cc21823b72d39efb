#include "pathcaps/tensor.hpp"

#include <sstream>

#include "pathcaps/errors.hpp"

namespace pathcaps {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape) {
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = v;
  return t;
}

int64_t Tensor::dim(size_t axis) const {
  if (axis >= impl_->shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(impl_->shape));
  return impl_->shape[axis];
}

double Tensor::scalar_value() const {
  if (numel() != 1)
    throw ContractError("scalar_value on tensor of shape " + shape_str(impl_->shape));
  return impl_->value[0];
}

std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty())
    throw ContractError("grad requested before backward populated it");
  return impl_->grad;
}

void Tensor::ensure_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
}

Tensor Tensor::detached_copy() const {
  return Tensor(impl_->shape, impl_->value);
}

void require_rank(const Tensor& t, size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

}  // namespace pathcaps
