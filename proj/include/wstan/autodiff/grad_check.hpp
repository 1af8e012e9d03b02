#pragma once

#include <functional>
#include <span>
#include <string>

#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"

namespace wstan::ad {

/// Builds a scalar loss on the given tape from tensors captured by the
/// closure. Must be deterministic: it is re-run for every perturbation.
using TensorProgram = std::function<Tensor(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_input;     // name of the input holding the worst entry
  std::size_t worst_index = 0;
  double analytic = 0.0;       // at the worst entry
  double numeric = 0.0;
  std::size_t checked = 0;     // number of partials compared
  double kink_margin = 0.0;    // distance to the nearest kink at the base point
};

/// Compares every analytic partial of `program` with respect to `inputs`
/// against the central difference (f(x + h) - f(x - h)) / 2h. Relative
/// error is |a - n| / max(1, |a|, |n|).
///
/// Inputs must be trainable. Their gradients are overwritten.
GradCheckResult grad_check(const TensorProgram& program,
                           std::span<const NamedTensor> inputs,
                           double h = 1e-5);

/// Same, but only for the flat positions listed per input.
GradCheckResult grad_check_sampled(
    const TensorProgram& program, std::span<const NamedTensor> inputs,
    std::span<const std::vector<std::size_t>> positions, double h = 1e-5);

/// Kink margin of one evaluation of `program`.
double kink_margin(const TensorProgram& program);

}  // namespace wstan::ad
