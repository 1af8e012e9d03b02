#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wstan/autodiff/ops.hpp"
#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"
#include "wstan/grid_mask.hpp"
#include "wstan/span.hpp"

namespace wstan::map {

/// Row-major [count, dim] matrix of per-clip (or per-frame) features.
struct FeatureMatrix {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  bool operator==(const FeatureMatrix&) const = default;
};

using ClipFeatures = FeatureMatrix;

enum class MapBackend { kPool, kStackConv };

const char* backend_name(MapBackend backend);
MapBackend parse_backend(std::string_view name);

/// Number of candidate moments N(N+1)/2.
constexpr std::size_t moment_count(std::size_t n) { return n * (n + 1) / 2; }

/// Max-pools T frames into N contiguous clips. The first T mod N clips take
/// one extra frame.
ClipFeatures pool_clips(const FeatureMatrix& frames, std::size_t clips);

/// F_ij = elementwise max of f_i..f_j for i <= j, zero below the diagonal.
/// Returns a constant [N, N, d] tensor.
ad::Tensor build_map_pool(const ClipFeatures& clips);

/// Parameters of the stacked-convolution map builder.
struct StackConvParams {
  ad::Tensor kernel;  // [2, d, d]: tap 0 reads F_{i,j-1}, tap 1 reads F_{i+1,j}
  ad::Tensor bias;    // [d]
  ad::Activation activation = ad::Activation::kIdentity;

  /// Kernel initialized near the two-tap average.
  static StackConvParams averaging(std::size_t dim, double noise,
                                   std::uint64_t seed,
                                   ad::Activation activation);
};

/// Fills the map offset by offset: F_ii = f_i and
/// F_{i,i+d} = act(W0 F_{i,i+d-1} + W1 F_{i+1,i+d} + b).
ad::Tensor build_map_stackconv(ad::Tape& tape, const ClipFeatures& clips,
                               const StackConvParams& params);

/// [i, j] clip indices to seconds: [i T / N, (j + 1) T / N].
Span moment_to_span(std::size_t i, std::size_t j, std::size_t clips,
                    double duration);

}  // namespace wstan::map
