#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wstan/grid_mask.hpp"
#include "wstan/span.hpp"

namespace wstan::eval {

/// Slack for IoU comparisons. Clip-aligned spans often sit exactly on a
/// threshold (0.5 is common) and seconds-based arithmetic can land one ulp
/// either side of it.
inline constexpr double kIouSlack = 1e-9;

struct ScoredSpan {
  Span span;
  double score = 0.0;
  Moment moment;  // source cell on the score map
};

/// Descending by score.
using RankedPrediction = std::vector<ScoredSpan>;

/// All valid moments of an [N, N] map as second spans, sorted by score
/// descending with ties broken by lowest (i, j).
RankedPrediction rank_moments(std::span<const double> score_map,
                              const GridMask& mask, double duration);

/// Greedy temporal NMS: keep the best remaining span, drop every later span
/// whose IoU with a kept span exceeds `iou_threshold`.
RankedPrediction nms(const RankedPrediction& ranked, double iou_threshold);

struct GroundedSample {
  RankedPrediction prediction;  // already post-processed
  Span truth;
};

/// Percentage of samples whose top-k spans contain one with
/// IoU >= iou_threshold against the truth.
double recall_at_k(std::span<const GroundedSample> samples, std::size_t k,
                   double iou_threshold);

/// Mean top-1 IoU, as a percentage.
double mean_iou(std::span<const GroundedSample> samples);

struct AnnotatedSample {
  RankedPrediction prediction;
  std::vector<Span> annotations;
};

/// Mean over samples of the mean top-1 IoU against the best-matched three
/// annotations (all annotations when fewer than three), as a percentage.
double mean_iou(std::span<const AnnotatedSample> samples);

/// Indices of the three annotations with the largest pairwise IoU sum;
/// lexicographically first subset on ties. Fewer than three: all indices.
std::vector<std::size_t> best_matched_three(std::span<const Span> annotations);

/// The 21 moments over six fixed segments of `segment` seconds, in row-major
/// (start, end) order.
std::vector<Span> didemo_candidates(double segment = 5.0);

/// 1-based rank of each best-matched annotation in `ranked`, which must list
/// exactly the 21 candidates. Throws DataError when an annotation is not a
/// candidate.
std::vector<std::size_t> didemo_ranks(const RankedPrediction& ranked,
                                      std::span<const Span> annotations);

/// Hit when the mean rank of the best-matched annotations is <= k.
bool didemo_rank_at_k(const RankedPrediction& ranked,
                      std::span<const Span> annotations, std::size_t k);

/// Query geometry for the random-scoring baseline.
struct QueryGeometry {
  double duration = 0.0;
  Span truth;
};

/// R@k at `iou_threshold` when every candidate gets an i.i.d. uniform score,
/// averaged over `repeats` seeded draws and passed through the same
/// rank/NMS/recall path as model predictions.
double random_baseline_recall(std::span<const QueryGeometry> queries,
                              const GridMask& mask, std::size_t k,
                              double iou_threshold, double nms_threshold,
                              std::size_t repeats, std::uint64_t seed);

}  // namespace wstan::eval
