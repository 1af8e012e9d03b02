#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They are written from the definitions, not from the
// library code, and deliberately use different formulations where one
// exists.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

struct Interval {
  double s = 0.0;
  double e = 0.0;
};

// Union measured as |a| + |b| - |a n b| rather than the hull.
inline double iou(Interval a, Interval b) {
  const double lo = a.s > b.s ? a.s : b.s;
  const double hi = a.e < b.e ? a.e : b.e;
  const double inter = hi > lo ? hi - lo : 0.0;
  const double uni = (a.e - a.s) + (b.e - b.s) - inter;
  return inter / uni;
}

// Truncated soft label, three explicit branches.
inline double truncate(double v, double lo, double hi) {
  if (v <= lo) return 0.0;
  if (v >= hi) return 1.0;
  return (v - lo) / (hi - lo);
}

struct Labels {
  std::vector<double> y;
  double w = 0.0;
};

// Labels from the first (row-major) maximum of an upper-triangular map.
inline Labels pseudo_labels(const std::vector<double>& map, std::size_t n,
                            double lo, double hi) {
  std::size_t bi = 0, bj = 0;
  bool found = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      if (!found || map[i * n + j] > map[bi * n + bj]) {
        bi = i;
        bj = j;
        found = true;
      }
  Labels out{std::vector<double>(n * n, 0.0), map[bi * n + bj]};
  const Interval best{double(bi), double(bj + 1)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      out.y[i * n + j] = truncate(iou({double(i), double(j + 1)}, best), lo, hi);
  return out;
}

// max over (k, i <= j) of maps[k][i][j].
inline double flat_max(const std::vector<std::vector<double>>& maps, std::size_t n) {
  double best = -1.0;
  bool any = false;
  for (const auto& m : maps)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        if (!any || m[i * n + j] > best) {
          best = m[i * n + j];
          any = true;
        }
  return best;
}

// Greedy NMS characterized as a fixed point: an item is kept iff no kept
// item ranked above it overlaps it by more than `thr`. Searches all subsets
// of the (already ranked) list and returns the unique fixed point.
inline std::vector<std::size_t> nms(const std::vector<Interval>& ranked, double thr) {
  const std::size_t m = ranked.size();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    bool ok = true;
    for (std::size_t x = 0; x < m && ok; ++x) {
      bool suppressed = false;
      for (std::size_t y = 0; y < x; ++y)
        if ((mask >> y & 1u) && iou(ranked[y], ranked[x]) > thr) suppressed = true;
      const bool kept = mask >> x & 1u;
      ok = kept == !suppressed;
    }
    if (ok) {
      std::vector<std::size_t> keep;
      for (std::size_t x = 0; x < m; ++x)
        if (mask >> x & 1u) keep.push_back(x);
      return keep;
    }
  }
  return {};
}

struct Query {
  std::vector<Interval> ranked;  // best first
  Interval truth;
};

// Percentage of queries with a hit among the first k entries.
inline double recall(const std::vector<Query>& qs, std::size_t k, double thr) {
  std::size_t hits = 0;
  for (const auto& q : qs) {
    bool hit = false;
    for (std::size_t r = 0; r < q.ranked.size() && r < k; ++r)
      hit = hit || (iou(q.ranked[r], q.truth) > 0.0 && iou(q.ranked[r], q.truth) + 1e-9 >= thr);
    hits += hit;
  }
  return qs.empty() ? 0.0 : 100.0 * double(hits) / double(qs.size());
}

inline double mean_iou(const std::vector<Query>& qs) {
  double sum = 0.0;
  for (const auto& q : qs) sum += q.ranked.empty() ? 0.0 : iou(q.ranked[0], q.truth);
  return qs.empty() ? 0.0 : 100.0 * sum / double(qs.size());
}

}  // namespace oracle
