#include "stas/core/tensor.hpp"

#include <sstream>

#include "stas/core/errors.hpp"

namespace stas {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : data_(std::make_shared<TensorData>()) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  data_->shape = std::move(shape);
  data_->value = std::move(values);
  data_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  std::vector<double> v;
  std::size_t c = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != c) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), c}, std::move(v), requires_grad);
}

const std::vector<double>& Tensor::value_ref() const {
  if (!data_) throw LifecycleError("use of undefined tensor");
  return data_->value;
}

const Shape& Tensor::shape() const {
  if (!data_) throw LifecycleError("use of undefined tensor");
  return data_->shape;
}

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.empty()) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<double> Tensor::mutable_data() {
  if (!data_) throw LifecycleError("use of undefined tensor");
  return data_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return value_ref()[0];
}

bool Tensor::requires_grad() const { return data_ && data_->requires_grad; }
bool Tensor::is_leaf() const { return !data_ || data_->leaf; }

void Tensor::set_requires_grad(bool flag) {
  if (!data_) throw LifecycleError("use of undefined tensor");
  data_->requires_grad = flag;
}

Tensor Tensor::detached() const { return Tensor(shape(), value_ref(), false); }

Tensor Tensor::clone() const { return Tensor(shape(), value_ref(), requires_grad()); }

Tensor Tensor::op_result(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t(std::move(shape), std::move(values), requires_grad);
  t.data_->leaf = !requires_grad;
  return t;
}

}  // namespace stas
