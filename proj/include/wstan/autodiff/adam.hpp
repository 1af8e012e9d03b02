#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wstan/autodiff/tensor.hpp"

namespace wstan::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamConfig& config);

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamConfig config);

  /// Applies one update from the accumulated gradients.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return config_; }
  const AdamState& state(std::size_t i) const { return states_.at(i); }
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<NamedTensor> params_;
  std::vector<AdamState> states_;
  AdamConfig config_;
};

}  // namespace wstan::ad
