#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace wstan {

/// Validity mask over an n x n grid of candidate moments, row-major.
struct GridMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> valid;

  /// Valid iff i <= j.
  static GridMask upper_triangle(std::size_t n) {
    GridMask m{n, std::vector<std::uint8_t>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) m.valid[i * n + j] = 1;
    return m;
  }

  static GridMask all(std::size_t n) {
    return GridMask{n, std::vector<std::uint8_t>(n * n, 1)};
  }

  bool operator()(std::size_t i, std::size_t j) const {
    return valid[i * n + j] != 0;
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto v : valid) c += v != 0;
    return c;
  }
};

}  // namespace wstan
