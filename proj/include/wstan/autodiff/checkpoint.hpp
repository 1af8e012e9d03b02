#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wstan/autodiff/tensor.hpp"

namespace wstan::ad {

inline constexpr const char* kCheckpointHeader = "WSTAN-CKPT v1";

/// Textual checkpoint container:
///
///   WSTAN-CKPT v1
///   meta <key> <value...>
///   tensor <name> <rank> <d0> ... <d(rank-1)>
///   <values, 17 significant digits, space separated>
///
/// Values round-trip doubles exactly.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string* find_meta(const std::string& key) const;
  const Tensor* find_tensor(const std::string& name) const;
};

std::string format_double(double v);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params` by name; every parameter must be
/// present with a matching shape.
void restore_parameters(const Checkpoint& ckpt, std::span<NamedTensor> params);

}  // namespace wstan::ad
