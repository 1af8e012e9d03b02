#include "wstan/loss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wstan/autodiff/ops.hpp"
#include "wstan/error.hpp"

namespace wstan::loss {

void Thresholds::validate() const {
  if (!(lower >= 0.0 && upper <= 1.0 && lower < upper))
    throw ConfigError("pseudo-label thresholds need 0 <= o_min < o_max <= 1, got " +
                      std::to_string(lower) + ", " + std::to_string(upper));
}

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
    throw ConfigError("loss weights must sum to 1, got alpha+beta+gamma = " +
                      std::to_string(alpha + beta + gamma));
}

double iou(const Span& a, const Span& b) {
  if (!(a.start < a.end) || !(b.start < b.end))
    throw PreconditionError("iou: degenerate interval");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

double truncate_iou(double overlap, const Thresholds& th) {
  if (overlap <= th.lower) return 0.0;
  if (overlap >= th.upper) return 1.0;
  return (overlap - th.lower) / (th.upper - th.lower);
}

PseudoLabels pseudo_labels(std::span<const double> source_map,
                           const GridMask& mask, const Thresholds& th) {
  const std::size_t n = mask.n;
  if (source_map.size() != n * n)
    throw DimensionError("pseudo_labels: map of " + std::to_string(source_map.size()) +
                         " cells for N=" + std::to_string(n));
  std::size_t best = n * n;
  for (std::size_t p = 0; p < n * n; ++p)
    if (mask.valid[p] && (best == n * n || source_map[p] > source_map[best])) best = p;
  if (best == n * n) throw PreconditionError("pseudo_labels: no valid candidate");

  PseudoLabels out;
  out.n = n;
  out.labels.assign(n * n, 0.0);
  out.weight = source_map[best];
  out.arg_start = best / n;
  out.arg_end = best % n;
  const Span peak{static_cast<double>(out.arg_start), static_cast<double>(out.arg_end + 1)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      if (!mask(i, j)) continue;
      const Span cand{static_cast<double>(i), static_cast<double>(j + 1)};
      out.labels[i * n + j] = truncate_iou(iou(peak, cand), th);
    }
  return out;
}

ad::Tensor mil_loss(ad::Tape& tape, const ad::Tensor& matching_score, int matched) {
  const double y = matched ? 1.0 : 0.0;
  return ad::binary_cross_entropy(tape, matching_score, std::span(&y, 1), {}, 1.0);
}

ad::Tensor soft_ce_loss(ad::Tape& tape, const ad::Tensor& pred_map,
                        std::span<const double> labels, double weight,
                        const GridMask& mask) {
  const double c = static_cast<double>(mask.count());
  return ad::binary_cross_entropy(tape, pred_map, labels, mask.valid, weight / c);
}

std::vector<PseudoLabels> make_targets(std::span<const ad::Tensor> source_maps,
                                       const GridMask& mask, const Thresholds& th) {
  std::vector<PseudoLabels> targets;
  targets.reserve(source_maps.size());
  for (const auto& m : source_maps) targets.push_back(pseudo_labels(m.values(), mask, th));
  return targets;
}

ad::Tensor paragraph_loss(ad::Tape& tape, std::span<const ad::Tensor> pred_maps,
                          std::span<const PseudoLabels> targets,
                          const GridMask& mask) {
  if (pred_maps.empty()) throw PreconditionError("paragraph loss over zero sentences");
  if (pred_maps.size() != targets.size())
    throw PreconditionError("paragraph loss: " + std::to_string(pred_maps.size()) +
                            " maps but " + std::to_string(targets.size()) +
                            " label sets");
  ad::Tensor total;
  for (std::size_t k = 0; k < pred_maps.size(); ++k) {
    ad::Tensor term = soft_ce_loss(tape, pred_maps[k], targets[k].labels,
                                   targets[k].weight, mask);
    total = total.defined() ? ad::add(tape, total, term) : term;
  }
  return ad::scale(tape, total, 1.0 / static_cast<double>(pred_maps.size()));
}

ad::Tensor sd_loss(ad::Tape& tape, std::span<const ad::Tensor> maps,
                   const GridMask& mask, const Thresholds& th) {
  const auto targets = make_targets(maps, mask, th);
  return paragraph_loss(tape, maps, targets, mask);
}

ad::Tensor cb_loss(ad::Tape& tape, std::span<const ad::Tensor> src_maps,
                   std::span<const ad::Tensor> cb_maps, const GridMask& mask,
                   const Thresholds& th) {
  if (src_maps.size() != cb_maps.size())
    throw PreconditionError("cb_loss: " + std::to_string(src_maps.size()) +
                            " source maps vs " + std::to_string(cb_maps.size()) +
                            " complementary maps");
  const auto targets = make_targets(src_maps, mask, th);
  return paragraph_loss(tape, cb_maps, targets, mask);
}

ad::Tensor cb_sd_loss(ad::Tape& tape, std::span<const ad::Tensor> cb_maps,
                      const GridMask& mask, const Thresholds& th) {
  return sd_loss(tape, cb_maps, mask, th);
}

ad::Tensor total_loss(ad::Tape& tape, const LossComponents& parts,
                      const LossWeights& weights, int matched) {
  weights.validate();
  if (!parts.mil.defined()) throw PreconditionError("total_loss: MIL term missing");
  ad::Tensor total = ad::scale(tape, parts.mil, weights.alpha);
  if (!matched) return total;
  auto accumulate = [&](const ad::Tensor& term, double w) {
    if (term.defined()) total = ad::add(tape, total, ad::scale(tape, term, w));
  };
  accumulate(parts.cb, weights.beta);
  accumulate(parts.sd, weights.gamma);
  accumulate(parts.cb_sd, weights.gamma);
  return total;
}

}  // namespace wstan::loss
