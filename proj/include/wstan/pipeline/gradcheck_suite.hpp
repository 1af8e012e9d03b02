#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wstan/autodiff/grad_check.hpp"

namespace wstan::pipeline {

/// One random point of a gradient-check case.
struct GradCheckInstance {
  ad::TensorProgram program;
  std::vector<ad::NamedTensor> inputs;
  std::size_t max_positions = 0;  // per input; 0 checks every entry
};

struct GradCheckCase {
  std::string name;
  std::function<GradCheckInstance(std::uint64_t seed)> make;
};

struct GradCheckOptions {
  std::size_t points = 25;
  double h = 1e-5;
  double tolerance = 1e-4;
  double min_kink_margin = 1e-3;  // points closer to a kink are redrawn
  std::size_t max_redraws = 200;  // per point
  std::uint64_t seed = 7;
};

struct GradCheckCaseReport {
  std::string name;
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst_input;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t points = 0;
  std::size_t partials = 0;
  std::size_t redraws = 0;
  std::string error;  // set when the case threw
};

struct GradCheckReport {
  std::vector<GradCheckCaseReport> cases;
  std::vector<std::string> uncovered_ops;  // tape ops no case exercised
  double seconds = 0.0;

  bool passed() const;
  std::string to_text() const;
};

/// Every tape op name the library can emit.
const std::vector<std::string>& registered_ops();

/// One case per primitive op plus the encoder, model blocks, losses and the
/// full objective (matched and unmatched) on a tiny model with frozen
/// pseudo-label targets.
std::vector<GradCheckCase> default_gradcheck_cases();

/// A deliberately broken op (its backward is off by a factor of two), for
/// exercising the failure path.
GradCheckCase wrong_gradient_case();

GradCheckReport run_gradcheck_suite(const std::vector<GradCheckCase>& cases,
                                    const GradCheckOptions& options);

}  // namespace wstan::pipeline
