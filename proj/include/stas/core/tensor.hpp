#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stas {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  // False for tensors produced by a recorded op.
  bool leaf = true;
};

// Dense row-major array of doubles with shared-handle semantics: copying a
// Tensor aliases the same storage, which is how parameters are updated in
// place by an optimizer while forward passes hold references to them.
//
// Every op treats a tensor as a matrix of rows() x cols(), where cols() is
// the trailing extent and rows() is the product of the leading extents.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(data_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return value_ref().size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return value_ref(); }
  // Writable view. Writing into a tensor that a live tape references
  // invalidates that tape's backward pass.
  std::span<double> mutable_data();

  double operator[](std::size_t i) const { return value_ref()[i]; }
  double at(std::size_t r, std::size_t c) const { return value_ref()[r * cols() + c]; }
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  void set_requires_grad(bool flag);

  // Deep copy without gradient tracking.
  Tensor detached() const;
  // Deep copy preserving the requires_grad flag as a fresh leaf.
  Tensor clone() const;

  const TensorData* id() const noexcept { return data_.get(); }

  // Construction path for op results; marks the tensor as non-leaf when it
  // participates in gradient tracking.
  static Tensor op_result(Shape shape, std::vector<double> values, bool requires_grad);

 private:
  const std::vector<double>& value_ref() const;

  std::shared_ptr<TensorData> data_;
};

}  // namespace stas
