#pragma once

#include <cstddef>

namespace wstan {

/// Half-open time interval [start, end) in seconds (or clip units).
struct Span {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Span&) const = default;
};

/// Candidate moment m_ij: start clip i, end clip j, inclusive, i <= j.
struct Moment {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Moment&) const = default;
};

}  // namespace wstan
