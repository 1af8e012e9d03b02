#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wstan/autodiff/tape.hpp"
#include "wstan/autodiff/tensor.hpp"

namespace wstan::text {

struct EncoderConfig {
  std::size_t vocab_size = 2;
  std::size_t dim = 64;     // sentence vector length; each direction gets dim / 2
  std::size_t layers = 1;
};

/// Bidirectional LSTM sentence encoder over trainable word embeddings.
///
/// The sentence vector is [forward state after the last token ; backward
/// state after the first token]. Gates are ordered input, forget, cell,
/// output. Layer l > 0 reads the concatenated per-step outputs of layer l-1.
class TextEncoder {
 public:
  TextEncoder(const EncoderConfig& config, std::uint64_t seed);

  /// Runs the encoder; the result participates in `tape`.
  ad::Tensor encode(ad::Tape& tape, std::span<const std::size_t> tokens) const;

  const EncoderConfig& config() const { return config_; }
  std::vector<ad::NamedTensor> parameters() const;

 private:
  struct Direction {
    ad::Tensor w_input;   // [4H, in]
    ad::Tensor w_hidden;  // [4H, H]
    ad::Tensor bias;      // [4H]
  };
  struct Layer {
    Direction forward;
    Direction backward;
  };

  std::vector<ad::Tensor> run_direction(ad::Tape& tape, const Direction& dir,
                                        const std::vector<ad::Tensor>& inputs,
                                        bool reverse) const;

  EncoderConfig config_;
  std::size_t hidden_ = 0;
  ad::Tensor embedding_;  // [V, dim]
  std::vector<Layer> layers_;
};

}  // namespace wstan::text
