#include "wstan/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wstan/error.hpp"

namespace wstan::ad {
namespace {

double evaluate(const TensorProgram& program) {
  Tape tape;
  const Tensor loss = program(tape);
  if (loss.size() != 1)
    throw PreconditionError("grad_check: program must return a scalar");
  return loss.item();
}

}  // namespace

double kink_margin(const TensorProgram& program) {
  Tape tape;
  program(tape);
  return tape.kink_margin();
}

GradCheckResult grad_check_sampled(
    const TensorProgram& program, std::span<const NamedTensor> inputs,
    std::span<const std::vector<std::size_t>> positions, double h) {
  if (!(h > 0.0)) throw PreconditionError("grad_check: step must be positive");
  if (positions.size() != inputs.size())
    throw PreconditionError("grad_check: one position list per input");
  for (const auto& in : inputs)
    if (!in.tensor.trainable())
      throw PreconditionError("grad_check: input '" + in.name +
                              "' is not trainable");

  GradCheckResult result;
  {
    Tape tape;
    const Tensor loss = program(tape);
    for (const auto& in : inputs) {
      Tensor t = in.tensor;
      t.zero_grad();
    }
    tape.backward(loss);
    result.kink_margin = tape.kink_margin();
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k].tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    for (std::size_t idx : positions[k]) {
      const double saved = values[idx];
      values[idx] = saved + h;
      const double f_plus = evaluate(program);
      values[idx] = saved - h;
      const double f_minus = evaluate(program);
      values[idx] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[idx];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double err = std::abs(a - numeric) / denom;
      ++result.checked;
      if (!std::isfinite(err))
        throw NumericError("grad_check: non-finite comparison for '" +
                           inputs[k].name + "'");
      if (result.checked == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = inputs[k].name;
        result.worst_index = idx;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const TensorProgram& program,
                           std::span<const NamedTensor> inputs, double h) {
  std::vector<std::vector<std::size_t>> positions;
  positions.reserve(inputs.size());
  for (const auto& in : inputs) {
    std::vector<std::size_t> all(in.tensor.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    positions.push_back(std::move(all));
  }
  return grad_check_sampled(program, inputs, positions, h);
}

}  // namespace wstan::ad
