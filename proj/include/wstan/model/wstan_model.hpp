#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wstan/autodiff/ops.hpp"
#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"
#include "wstan/grid_mask.hpp"
#include "wstan/map/moment_map.hpp"
#include "wstan/text/encoder.hpp"

namespace wstan::model {

struct ModelConfig {
  std::size_t clips = 16;         // N
  std::size_t text_dim = 64;      // d^S
  std::size_t visual_dim = 16;    // d^V
  std::size_t fused_dim = 32;     // d^F
  std::size_t tan_layers = 4;     // L
  std::size_t tan_kernel = 3;     // K, odd
  std::size_t encoder_layers = 1;
  std::size_t vocab_size = 2;
  map::MapBackend backend = map::MapBackend::kStackConv;
  ad::Activation tan_activation = ad::Activation::kRelu;
  ad::Activation map_activation = ad::Activation::kIdentity;

  void validate() const;
};

/// w^S [d^F, d^S] and w^V [d^F, d^V], both bias-free.
struct FusionParams {
  ad::Tensor sentence_proj;
  ad::Tensor moment_proj;
};

/// L kernels of shape [K, K, d^F, d^F], bias-free.
struct TanParams {
  std::vector<ad::Tensor> kernels;
  ad::Activation activation = ad::Activation::kRelu;
};

/// Per-position d^F -> 1 projection followed by a sigmoid.
struct HeadParams {
  ad::Tensor weight;  // [1, d^F]
  ad::Tensor bias;    // [1]
};

/// F_ij,k = (w^S h_k) * (w^V F_ij) on valid positions, zero elsewhere.
/// Returns [N, N, d^F].
ad::Tensor fuse(ad::Tape& tape, const ad::Tensor& sentence,
                const ad::Tensor& moment_map, const FusionParams& params,
                const GridMask& mask);

/// L masked convolutions, each followed by the activation and re-masking.
ad::Tensor tan_forward(ad::Tape& tape, const ad::Tensor& fused,
                       const TanParams& params, const GridMask& mask);

/// [N, N] score map in [0, 1] with exact zeros below the diagonal.
ad::Tensor score_head(ad::Tape& tape, const ad::Tensor& context,
                      const HeadParams& params, const GridMask& mask);

struct MatchingScore {
  ad::Tensor value;          // P, scalar
  std::size_t sentence = 0;  // argmax k
  std::size_t start = 0;     // argmax i
  std::size_t end = 0;       // argmax j
};

/// P = max_k max_(i,j) P_k^M. Gradient reaches only the global argmax.
MatchingScore matching_score(ad::Tape& tape, std::span<const ad::Tensor> maps,
                             const GridMask& mask);

/// Score maps for every sentence of one paragraph.
struct ParagraphMaps {
  std::vector<ad::Tensor> maps;     // P_k^M
  std::vector<ad::Tensor> cb_maps;  // P_k^{M,CB}; empty unless requested
};

/// Weakly supervised temporal adjacent network: sentence encoder, moment
/// map, fusion, temporal adjacent convolutions, matching head and
/// complementary-branch head.
class WstanModel {
 public:
  WstanModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const GridMask& mask() const { return mask_; }
  const text::TextEncoder& encoder() const { return encoder_; }

  ad::Tensor moment_map(ad::Tape& tape, const map::ClipFeatures& clips) const;
  ad::Tensor context_map(ad::Tape& tape, const ad::Tensor& sentence,
                         const ad::Tensor& moment_map) const;

  ParagraphMaps forward(ad::Tape& tape, const map::ClipFeatures& clips,
                        std::span<const std::vector<std::size_t>> sentences,
                        bool with_cb) const;

  const FusionParams& fusion() const { return fusion_; }
  const TanParams& tan() const { return tan_; }
  const HeadParams& head() const { return head_; }
  const HeadParams& cb_head() const { return cb_head_; }

  /// Every trainable tensor with a stable name.
  std::vector<ad::NamedTensor> parameters() const;

 private:
  ModelConfig config_;
  GridMask mask_;
  text::TextEncoder encoder_;
  map::StackConvParams stackconv_;
  FusionParams fusion_;
  TanParams tan_;
  HeadParams head_;
  HeadParams cb_head_;
};

}  // namespace wstan::model
