#include "wstan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wstan/error.hpp"
#include "wstan/loss/losses.hpp"
#include "wstan/map/moment_map.hpp"
#include "wstan/random.hpp"

namespace wstan::eval {
namespace {

bool same_span(const Span& a, const Span& b) {
  return std::abs(a.start - b.start) <= 1e-9 && std::abs(a.end - b.end) <= 1e-9;
}

void require_samples(std::size_t n, const char* metric) {
  if (n == 0) throw PreconditionError(std::string(metric) + " is undefined for zero samples");
}

}  // namespace

RankedPrediction rank_moments(std::span<const double> score_map,
                              const GridMask& mask, double duration) {
  const std::size_t n = mask.n;
  if (score_map.size() != n * n)
    throw DimensionError("rank_moments: map of " + std::to_string(score_map.size()) +
                         " cells for N=" + std::to_string(n));
  RankedPrediction out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      if (mask(i, j))
        out.push_back({map::moment_to_span(i, j, n, duration), score_map[i * n + j],
                       Moment{i, j}});
  if (out.empty()) throw PreconditionError("rank_moments: no valid moment");
  // Row-major insertion order makes the stable sort's tie rule lexicographic.
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredSpan& a, const ScoredSpan& b) { return a.score > b.score; });
  return out;
}

RankedPrediction nms(const RankedPrediction& ranked, double iou_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0)
    throw PreconditionError("nms: threshold must lie in [0, 1]");
  RankedPrediction kept;
  for (const auto& cand : ranked) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredSpan& k) {
      return loss::iou(k.span, cand.span) > iou_threshold + kIouSlack;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

double recall_at_k(std::span<const GroundedSample> samples, std::size_t k,
                   double iou_threshold) {
  require_samples(samples.size(), "recall_at_k");
  if (k == 0) throw PreconditionError("recall_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    const std::size_t top = std::min(k, s.prediction.size());
    for (std::size_t r = 0; r < top; ++r) {
      // A hit needs some overlap, so threshold 0 means "touches the truth".
      const double o = loss::iou(s.prediction[r].span, s.truth);
      if (o > 0.0 && o + kIouSlack >= iou_threshold) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(samples.size());
}

double mean_iou(std::span<const GroundedSample> samples) {
  require_samples(samples.size(), "mean_iou");
  double total = 0.0;
  for (const auto& s : samples) {
    if (s.prediction.empty()) continue;
    total += loss::iou(s.prediction.front().span, s.truth);
  }
  return 100.0 * total / static_cast<double>(samples.size());
}

double mean_iou(std::span<const AnnotatedSample> samples) {
  require_samples(samples.size(), "mean_iou");
  double total = 0.0;
  for (const auto& s : samples) {
    if (s.prediction.empty() || s.annotations.empty()) continue;
    const auto chosen = best_matched_three(s.annotations);
    double sum = 0.0;
    for (auto idx : chosen) sum += loss::iou(s.prediction.front().span, s.annotations[idx]);
    total += sum / static_cast<double>(chosen.size());
  }
  return 100.0 * total / static_cast<double>(samples.size());
}

std::vector<std::size_t> best_matched_three(std::span<const Span> annotations) {
  const std::size_t n = annotations.size();
  if (n <= 3) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::vector<std::size_t> best;
  double best_sum = -1.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        const double sum = loss::iou(annotations[a], annotations[b]) +
                           loss::iou(annotations[a], annotations[c]) +
                           loss::iou(annotations[b], annotations[c]);
        if (sum > best_sum) {
          best_sum = sum;
          best = {a, b, c};
        }
      }
  return best;
}

std::vector<Span> didemo_candidates(double segment) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i; j < 6; ++j)
      out.push_back(Span{static_cast<double>(i) * segment,
                         static_cast<double>(j + 1) * segment});
  return out;
}

std::vector<std::size_t> didemo_ranks(const RankedPrediction& ranked,
                                      std::span<const Span> annotations) {
  if (ranked.size() != 21)
    throw PreconditionError("DiDeMo protocol needs exactly 21 ranked candidates, got " +
                            std::to_string(ranked.size()));
  if (annotations.empty()) throw PreconditionError("DiDeMo protocol needs annotations");
  std::vector<std::size_t> ranks;
  for (auto idx : best_matched_three(annotations)) {
    const auto it = std::find_if(ranked.begin(), ranked.end(), [&](const ScoredSpan& s) {
      return same_span(s.span, annotations[idx]);
    });
    if (it == ranked.end())
      throw DataError("annotation [" + std::to_string(annotations[idx].start) + ", " +
                      std::to_string(annotations[idx].end) +
                      "] is not one of the 21 DiDeMo candidates");
    ranks.push_back(static_cast<std::size_t>(it - ranked.begin()) + 1);
  }
  return ranks;
}

bool didemo_rank_at_k(const RankedPrediction& ranked,
                      std::span<const Span> annotations, std::size_t k) {
  const auto ranks = didemo_ranks(ranked, annotations);
  const double total = static_cast<double>(std::accumulate(ranks.begin(), ranks.end(), std::size_t{0}));
  return total <= static_cast<double>(k) * static_cast<double>(ranks.size());
}

double random_baseline_recall(std::span<const QueryGeometry> queries,
                              const GridMask& mask, std::size_t k,
                              double iou_threshold, double nms_threshold,
                              std::size_t repeats, std::uint64_t seed) {
  require_samples(queries.size(), "random baseline");
  if (repeats == 0) throw PreconditionError("random baseline needs >= 1 repeat");
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, r));
    std::vector<GroundedSample> samples;
    samples.reserve(queries.size());
    for (const auto& q : queries) {
      auto scores = uniform_values(rng, mask.n * mask.n, 0.0, 1.0);
      for (std::size_t p = 0; p < scores.size(); ++p)
        if (!mask.valid[p]) scores[p] = 0.0;
      samples.push_back({nms(rank_moments(scores, mask, q.duration), nms_threshold), q.truth});
    }
    total += recall_at_k(samples, k, iou_threshold);
  }
  return total / static_cast<double>(repeats);
}

}  // namespace wstan::eval
