#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pathcaps {

class Graph;

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward touches it
  Graph* graph = nullptr;
  int node = -1;
};
}  // namespace detail

// Dense row-major 64-bit float array. Tensor is a shared handle: copies
// alias the same storage, accessors are const-qualified but return mutable
// views. A tensor participates in at most one differentiation graph at a
// time (see Graph).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor full(Shape shape, double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  size_t rank() const { return impl_->shape.size(); }
  int64_t dim(size_t axis) const;
  int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }

  std::vector<double>& values() const { return impl_->value; }
  double scalar_value() const;  // requires numel() == 1

  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<double>& grad() const;  // requires a populated grad
  void ensure_grad() const;           // allocate zeros when absent
  void clear_grad() const { impl_->grad.clear(); }

  Graph* graph() const { return impl_->graph; }
  int node() const { return impl_->node; }

  // Deep copy of the values, detached from any graph, no grad.
  Tensor detached_copy() const;

 private:
  friend class Graph;
  friend detail::TensorImpl* impl_of(const Tensor& t);
  friend std::shared_ptr<detail::TensorImpl> share_impl(const Tensor& t);

  std::shared_ptr<detail::TensorImpl> impl_;
};

inline detail::TensorImpl* impl_of(const Tensor& t) { return t.impl_.get(); }
inline std::shared_ptr<detail::TensorImpl> share_impl(const Tensor& t) { return t.impl_; }

void require_rank(const Tensor& t, size_t rank, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace pathcaps
