#include "wstan/text/encoder.hpp"

#include <cmath>
#include <string>

#include "wstan/autodiff/ops.hpp"
#include "wstan/error.hpp"
#include "wstan/random.hpp"

namespace wstan::text {

TextEncoder::TextEncoder(const EncoderConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config.dim < 2 || config.dim % 2 != 0)
    throw ConfigError("text encoder dim must be even and >= 2, got " +
                      std::to_string(config.dim));
  if (config.layers == 0) throw ConfigError("text encoder needs >= 1 layer");
  if (config.vocab_size < 2) throw ConfigError("vocabulary must include reserved tokens");
  hidden_ = config.dim / 2;

  Rng rng(derive_seed(seed, 0x7e47));
  embedding_ = ad::Tensor({config.vocab_size, config.dim},
                          uniform_values(rng, config.vocab_size * config.dim, -0.1, 0.1),
                          true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  auto make_direction = [&](std::size_t in) {
    Direction d;
    d.w_input = ad::Tensor({4 * hidden_, in},
                           uniform_values(rng, 4 * hidden_ * in, -bound, bound), true);
    d.w_hidden = ad::Tensor({4 * hidden_, hidden_},
                            uniform_values(rng, 4 * hidden_ * hidden_, -bound, bound), true);
    std::vector<double> b(4 * hidden_, 0.0);
    for (std::size_t i = hidden_; i < 2 * hidden_; ++i) b[i] = 1.0;  // forget gate
    d.bias = ad::Tensor({4 * hidden_}, std::move(b), true);
    return d;
  };
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.dim : 2 * hidden_;
    Layer layer;
    layer.forward = make_direction(in);
    layer.backward = make_direction(in);
    layers_.push_back(std::move(layer));
  }
}

std::vector<ad::Tensor> TextEncoder::run_direction(
    ad::Tape& tape, const Direction& dir, const std::vector<ad::Tensor>& inputs,
    bool reverse) const {
  const std::size_t steps = inputs.size();
  std::vector<ad::Tensor> outputs(steps);
  ad::Tensor h = ad::Tensor::zeros({hidden_});
  ad::Tensor c = ad::Tensor::zeros({hidden_});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const ad::Tensor gates =
        ad::add(tape, ad::affine(tape, inputs[t], dir.w_input, dir.bias),
                ad::linear(tape, h, dir.w_hidden));
    const ad::Tensor i = ad::sigmoid(tape, ad::slice(tape, gates, 0, hidden_));
    const ad::Tensor f = ad::sigmoid(tape, ad::slice(tape, gates, hidden_, hidden_));
    const ad::Tensor g = ad::tanh(tape, ad::slice(tape, gates, 2 * hidden_, hidden_));
    const ad::Tensor o = ad::sigmoid(tape, ad::slice(tape, gates, 3 * hidden_, hidden_));
    c = ad::add(tape, ad::hadamard(tape, f, c), ad::hadamard(tape, i, g));
    h = ad::hadamard(tape, o, ad::tanh(tape, c));
    outputs[t] = h;
  }
  return outputs;
}

ad::Tensor TextEncoder::encode(ad::Tape& tape,
                               std::span<const std::size_t> tokens) const {
  if (tokens.empty()) throw DataError("cannot encode an empty sentence");
  std::vector<ad::Tensor> inputs;
  inputs.reserve(tokens.size());
  for (std::size_t id : tokens) {
    if (id >= config_.vocab_size)
      throw DataError("token index " + std::to_string(id) +
                      " outside vocabulary of size " +
                      std::to_string(config_.vocab_size));
    inputs.push_back(ad::gather_row(tape, embedding_, id));
  }

  ad::Tensor final_state;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto fwd = run_direction(tape, layers_[l].forward, inputs, false);
    const auto bwd = run_direction(tape, layers_[l].backward, inputs, true);
    if (l + 1 == layers_.size()) {
      const ad::Tensor parts[] = {fwd.back(), bwd.front()};
      final_state = ad::concat(tape, parts);
    } else {
      std::vector<ad::Tensor> next;
      next.reserve(inputs.size());
      for (std::size_t t = 0; t < inputs.size(); ++t) {
        const ad::Tensor parts[] = {fwd[t], bwd[t]};
        next.push_back(ad::concat(tape, parts));
      }
      inputs = std::move(next);
    }
  }
  return final_state;
}

std::vector<ad::NamedTensor> TextEncoder::parameters() const {
  std::vector<ad::NamedTensor> params{{"text.embedding", embedding_}};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = "text.lstm" + std::to_string(l);
    for (const auto& [suffix, dir] :
         {std::pair<const char*, const Direction*>{".fwd", &layers_[l].forward},
          {".bwd", &layers_[l].backward}}) {
      params.push_back({base + suffix + ".w_input", dir->w_input});
      params.push_back({base + suffix + ".w_hidden", dir->w_hidden});
      params.push_back({base + suffix + ".bias", dir->bias});
    }
  }
  return params;
}

}  // namespace wstan::text
