#include "wstan/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "wstan/error.hpp"

namespace wstan::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool trainable) {
  for (auto d : shape)
    if (d == 0)
      throw DimensionError("tensor shape " + shape_string(shape) +
                           " has a zero dimension");
  if (numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_string(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->trainable = trainable;
  node_->requires_grad = trainable;
  if (trainable) node_->ensure_grad();
}

Tensor Tensor::zeros(Shape shape, bool trainable) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), trainable);
}

Tensor Tensor::scalar(double value, bool trainable) {
  return Tensor({1}, {value}, trainable);
}

double Tensor::item() const {
  if (size() != 1)
    throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

}  // namespace wstan::ad
