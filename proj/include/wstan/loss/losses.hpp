#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"
#include "wstan/grid_mask.hpp"
#include "wstan/span.hpp"

namespace wstan::loss {

/// Truncation thresholds for soft pseudo-labels.
struct Thresholds {
  double lower = 0.9;  // o_min
  double upper = 1.0;  // o_max

  void validate() const;
};

/// Loss weights; must sum to one.
struct LossWeights {
  double alpha = 0.5;   // MIL
  double beta = 0.25;   // complementary branch
  double gamma = 0.25;  // self-discriminating (both branches)

  void validate() const;
};

/// Temporal IoU of two intervals. Throws PreconditionError when either
/// interval has start >= end.
double iou(const Span& a, const Span& b);

/// Truncated soft label for one IoU value.
double truncate_iou(double overlap, const Thresholds& th);

/// Soft targets derived from the argmax moment of a source score map.
struct PseudoLabels {
  std::size_t n = 0;
  std::vector<double> labels;  // [n * n], zero below the diagonal
  double weight = 0.0;         // max of the source map
  std::size_t arg_start = 0;
  std::size_t arg_end = 0;
};

/// IoU of every valid candidate with the argmax candidate (clip-index spans
/// [i, j + 1)), truncated with `th`. Ties in the argmax go to the lowest
/// row-major index.
PseudoLabels pseudo_labels(std::span<const double> source_map,
                           const GridMask& mask, const Thresholds& th);

/// -(y log P + (1 - y) log(1 - P)), P clamped away from 0 and 1.
ad::Tensor mil_loss(ad::Tape& tape, const ad::Tensor& matching_score,
                    int matched);

/// (w / C) * sum over valid j of BCE(p_j, y_j), C = number of valid cells.
ad::Tensor soft_ce_loss(ad::Tape& tape, const ad::Tensor& pred_map,
                        std::span<const double> labels, double weight,
                        const GridMask& mask);

/// Labels and weights generated from each map, as constants.
std::vector<PseudoLabels> make_targets(std::span<const ad::Tensor> source_maps,
                                       const GridMask& mask,
                                       const Thresholds& th);

/// Mean over sentences of soft_ce_loss(pred_k, targets_k).
ad::Tensor paragraph_loss(ad::Tape& tape, std::span<const ad::Tensor> pred_maps,
                          std::span<const PseudoLabels> targets,
                          const GridMask& mask);

/// Self-discriminating loss: labels from P_k^M, applied to P_k^M.
ad::Tensor sd_loss(ad::Tape& tape, std::span<const ad::Tensor> maps,
                   const GridMask& mask, const Thresholds& th);

/// Complementary loss: labels and weights from P_k^M, applied to P_k^{M,CB}.
ad::Tensor cb_loss(ad::Tape& tape, std::span<const ad::Tensor> src_maps,
                   std::span<const ad::Tensor> cb_maps, const GridMask& mask,
                   const Thresholds& th);

/// Self-discriminating loss on the complementary branch.
ad::Tensor cb_sd_loss(ad::Tape& tape, std::span<const ad::Tensor> cb_maps,
                      const GridMask& mask, const Thresholds& th);

/// Loss terms of one training pair; disabled terms stay undefined.
struct LossComponents {
  ad::Tensor mil;
  ad::Tensor cb;
  ad::Tensor sd;
  ad::Tensor cb_sd;
};

/// alpha L_mil + beta L_cb + gamma L_sd + gamma L_cbsd when matched,
/// alpha L_mil otherwise.
ad::Tensor total_loss(ad::Tape& tape, const LossComponents& parts,
                      const LossWeights& weights, int matched);

}  // namespace wstan::loss
