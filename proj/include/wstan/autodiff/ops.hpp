#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"
#include "wstan/grid_mask.hpp"

namespace wstan::ad {

enum class Activation { kIdentity, kRelu, kTanh, kSigmoid };

const char* activation_name(Activation act);
Activation parse_activation(std::string_view name);

// Shapes: trailing axis is the feature axis; leading axes are batch-like.

/// y = x W^T + b over the trailing axis. x: [..., in], W: [out, in], b: [out].
Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);
/// y = x W^T (no bias).
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w);

Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
/// Multiplies by a constant scalar.
Tensor scale(Tape& tape, const Tensor& x, double factor);
/// Sum of all entries, returned as a scalar tensor.
Tensor sum(Tape& tape, const Tensor& x);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor activate(Tape& tape, const Tensor& x, Activation act);

/// Contiguous slice [offset, offset + length) of a rank-1 tensor.
Tensor slice(Tape& tape, const Tensor& x, std::size_t offset,
             std::size_t length);
/// Concatenation of rank-1 tensors.
Tensor concat(Tape& tape, std::span<const Tensor> parts);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(Tape& tape, std::span<const Tensor> parts);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// Repeats a rank-1 tensor v to shape prefix + [len(v)].
Tensor repeat(Tape& tape, const Tensor& v, const Shape& prefix);
/// Row `index` of a [rows, cols] table.
Tensor gather_row(Tape& tape, const Tensor& table, std::size_t index);

/// Zeroes every position of an [n, n, d] (or [n, n]) map outside the mask.
Tensor apply_mask(Tape& tape, const Tensor& map, const GridMask& mask);

/// Same-size 2D convolution over a masked moment map.
///
/// map: [n, n, c_in], kernel: [k, k, c_in, c_out], k odd, zero padding
/// (k - 1) / 2. Masked input positions are zeroed before convolving and
/// masked output positions after.
Tensor conv2d_masked(Tape& tape, const Tensor& map, const Tensor& kernel,
                     const GridMask& mask);

struct MaxResult {
  Tensor value;        // scalar
  std::size_t arg = 0; // flat row-major index into x
};

/// Maximum over the positions where valid[idx] != 0. Ties go to the lowest
/// flat index. The gradient flows only to the arg position.
MaxResult max_reduce(Tape& tape, const Tensor& x,
                     std::span<const std::uint8_t> valid);

/// Probability clamp applied before every log.
inline constexpr double kProbEpsilon = 1e-7;

/// factor * sum over valid entries of -(y log p + (1 - y) log(1 - p)),
/// with p clamped to [eps, 1 - eps]. Targets are constants.
/// An empty `valid` span means every entry counts.
Tensor binary_cross_entropy(Tape& tape, const Tensor& p,
                            std::span<const double> targets,
                            std::span<const std::uint8_t> valid,
                            double factor);

}  // namespace wstan::ad
