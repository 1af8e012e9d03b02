#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wstan::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool trainable = false;
  bool requires_grad = false;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Shaped double-precision array with an optional accumulated gradient.
///
/// Tensor is a handle: copies share the same storage. Leaves created with
/// `trainable = true` hold model parameters; operation outputs recorded on a
/// Tape carry gradients only while that tape is alive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool trainable = false);

  static Tensor zeros(Shape shape, bool trainable = false);
  static Tensor scalar(double value, bool trainable = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;

  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  bool trainable() const { return node_->trainable; }
  bool requires_grad() const { return node_->requires_grad; }

  /// Value copy with no gradient tracking.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  detail::Node& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend class Tape;

  std::shared_ptr<detail::Node> node_;
};

}  // namespace wstan::ad

namespace wstan::ad {

/// A parameter tensor together with its stable checkpoint name.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

}  // namespace wstan::ad
