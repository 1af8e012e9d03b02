#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wstan/autodiff/tensor.hpp"

namespace wstan::ad {

/// Ordered record of executed operations for one reverse sweep.
///
/// Operations append themselves through `emit` after their inputs exist, so
/// record order is always a topological order. A tape is single-threaded; use
/// one tape per forward pass.
class Tape {
 public:
  /// Receives the output gradient; accumulates into input gradients.
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Creates the output tensor of `op`. Throws NumericError if any value is
  /// non-finite. When `needs_grad` is false nothing is recorded.
  Tensor emit(std::string_view op, Shape shape, std::vector<double> values,
              bool needs_grad, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Intermediate gradients are reset at
  /// the start of every sweep; leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  std::vector<std::string> op_names() const;

  /// Smallest distance to a non-differentiable point seen in this pass
  /// (relu kinks, max ties, probability clamps). Used by gradient checks.
  void note_kink_margin(double margin) {
    if (margin < kink_margin_) kink_margin_ = margin;
  }
  double kink_margin() const { return kink_margin_; }

 private:
  struct Record {
    std::string op;
    Tensor output;
    BackwardFn backward;
  };

  std::vector<Record> records_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace wstan::ad
