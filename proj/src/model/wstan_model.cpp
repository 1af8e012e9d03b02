#include "wstan/model/wstan_model.hpp"

#include <cmath>
#include <string>

#include "wstan/error.hpp"
#include "wstan/random.hpp"

namespace wstan::model {
namespace {

ad::Tensor uniform_tensor(Rng& rng, ad::Shape shape, double bound) {
  const auto n = ad::numel(shape);
  return ad::Tensor(std::move(shape), uniform_values(rng, n, -bound, bound), true);
}

HeadParams make_head(Rng& rng, std::size_t dim) {
  return HeadParams{uniform_tensor(rng, {1, dim}, 1.0 / std::sqrt(static_cast<double>(dim))),
                    ad::Tensor::zeros({1}, true)};
}

}  // namespace

void ModelConfig::validate() const {
  if (clips == 0) throw ConfigError("N (clips) must be >= 1");
  if (visual_dim == 0 || fused_dim == 0) throw ConfigError("feature widths must be >= 1");
  if (tan_layers == 0) throw ConfigError("temporal adjacent network needs L >= 1");
  if (tan_kernel % 2 == 0)
    throw ConfigError("temporal adjacent kernel size K must be odd, got " +
                      std::to_string(tan_kernel));
}

ad::Tensor fuse(ad::Tape& tape, const ad::Tensor& sentence,
                const ad::Tensor& moment_map, const FusionParams& params,
                const GridMask& mask) {
  if (sentence.rank() != 1 || moment_map.rank() != 3 ||
      params.sentence_proj.dim(1) != sentence.dim(0) ||
      params.moment_proj.dim(1) != moment_map.dim(2) ||
      params.sentence_proj.dim(0) != params.moment_proj.dim(0))
    throw ConfigError("fuse: sentence " + ad::shape_string(sentence.shape()) +
                      " / map " + ad::shape_string(moment_map.shape()) +
                      " incompatible with w^S " +
                      ad::shape_string(params.sentence_proj.shape()) + " and w^V " +
                      ad::shape_string(params.moment_proj.shape()));
  const std::size_t n = moment_map.dim(0);
  const ad::Tensor text = ad::linear(tape, sentence, params.sentence_proj);
  const ad::Tensor video = ad::linear(tape, moment_map, params.moment_proj);
  const ad::Tensor fused = ad::hadamard(tape, ad::repeat(tape, text, {n, n}), video);
  return ad::apply_mask(tape, fused, mask);
}

ad::Tensor tan_forward(ad::Tape& tape, const ad::Tensor& fused,
                       const TanParams& params, const GridMask& mask) {
  ad::Tensor x = fused;
  for (const auto& kernel : params.kernels) {
    x = ad::conv2d_masked(tape, x, kernel, mask);
    x = ad::activate(tape, x, params.activation);
    if (params.activation == ad::Activation::kSigmoid) x = ad::apply_mask(tape, x, mask);
  }
  return x;
}

ad::Tensor score_head(ad::Tape& tape, const ad::Tensor& context,
                      const HeadParams& params, const GridMask& mask) {
  const std::size_t n = context.dim(0);
  const ad::Tensor logits = ad::affine(tape, context, params.weight, params.bias);
  const ad::Tensor probs = ad::sigmoid(tape, ad::reshape(tape, logits, {n, n}));
  return ad::apply_mask(tape, probs, mask);
}

MatchingScore matching_score(ad::Tape& tape, std::span<const ad::Tensor> maps,
                             const GridMask& mask) {
  if (maps.empty()) throw PreconditionError("matching_score: no score maps");
  const std::size_t cells = mask.n * mask.n;
  std::vector<std::uint8_t> valid;
  valid.reserve(cells * maps.size());
  for (std::size_t k = 0; k < maps.size(); ++k)
    valid.insert(valid.end(), mask.valid.begin(), mask.valid.end());
  const ad::Tensor stacked = maps.size() == 1 ? maps.front() : ad::stack(tape, maps);
  ad::MaxResult best = ad::max_reduce(tape, stacked, valid);
  const std::size_t cell = best.arg % cells;
  return MatchingScore{std::move(best.value), best.arg / cells, cell / mask.n,
                       cell % mask.n};
}

WstanModel::WstanModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      mask_(GridMask::upper_triangle(config.clips)),
      encoder_(text::EncoderConfig{config.vocab_size, config.text_dim,
                                   config.encoder_layers},
               derive_seed(seed, 1)) {
  config_.validate();
  Rng rng(derive_seed(seed, 2));
  stackconv_ = map::StackConvParams::averaging(config.visual_dim, 0.01,
                                               derive_seed(seed, 3),
                                               config.map_activation);
  fusion_.sentence_proj = uniform_tensor(
      rng, {config.fused_dim, config.text_dim},
      1.0 / std::sqrt(static_cast<double>(config.text_dim)));
  fusion_.moment_proj = uniform_tensor(
      rng, {config.fused_dim, config.visual_dim},
      1.0 / std::sqrt(static_cast<double>(config.visual_dim)));
  tan_.activation = config.tan_activation;
  const double fan_in = static_cast<double>(config.tan_kernel * config.tan_kernel *
                                            config.fused_dim);
  for (std::size_t l = 0; l < config.tan_layers; ++l) {
    Rng layer_rng(derive_seed(seed, 100 + l));
    auto w = normal_values(layer_rng,
                           config.tan_kernel * config.tan_kernel *
                               config.fused_dim * config.fused_dim,
                           std::sqrt(2.0 / fan_in));
    tan_.kernels.emplace_back(ad::Shape{config.tan_kernel, config.tan_kernel,
                                        config.fused_dim, config.fused_dim},
                              std::move(w), true);
  }
  head_ = make_head(rng, config.fused_dim);
  cb_head_ = make_head(rng, config.fused_dim);
}

ad::Tensor WstanModel::moment_map(ad::Tape& tape,
                                  const map::ClipFeatures& clips) const {
  if (clips.count != config_.clips || clips.dim != config_.visual_dim)
    throw DimensionError("clip features [" + std::to_string(clips.count) + "x" +
                         std::to_string(clips.dim) + "] do not match model N=" +
                         std::to_string(config_.clips) +
                         ", d^V=" + std::to_string(config_.visual_dim));
  if (config_.backend == map::MapBackend::kPool) return map::build_map_pool(clips);
  return map::build_map_stackconv(tape, clips, stackconv_);
}

ad::Tensor WstanModel::context_map(ad::Tape& tape, const ad::Tensor& sentence,
                                   const ad::Tensor& moment_map) const {
  return tan_forward(tape, fuse(tape, sentence, moment_map, fusion_, mask_),
                     tan_, mask_);
}

ParagraphMaps WstanModel::forward(
    ad::Tape& tape, const map::ClipFeatures& clips,
    std::span<const std::vector<std::size_t>> sentences, bool with_cb) const {
  if (sentences.empty()) throw PreconditionError("forward: empty paragraph");
  const ad::Tensor features = moment_map(tape, clips);
  ParagraphMaps out;
  for (const auto& tokens : sentences) {
    const ad::Tensor h = encoder_.encode(tape, tokens);
    const ad::Tensor context = context_map(tape, h, features);
    out.maps.push_back(score_head(tape, context, head_, mask_));
    if (with_cb) out.cb_maps.push_back(score_head(tape, context, cb_head_, mask_));
  }
  return out;
}

std::vector<ad::NamedTensor> WstanModel::parameters() const {
  std::vector<ad::NamedTensor> params = encoder_.parameters();
  if (config_.backend == map::MapBackend::kStackConv) {
    params.push_back({"map.stackconv.kernel", stackconv_.kernel});
    params.push_back({"map.stackconv.bias", stackconv_.bias});
  }
  params.push_back({"fusion.w_sentence", fusion_.sentence_proj});
  params.push_back({"fusion.w_moment", fusion_.moment_proj});
  for (std::size_t l = 0; l < tan_.kernels.size(); ++l)
    params.push_back({"tan.conv" + std::to_string(l), tan_.kernels[l]});
  params.push_back({"head.weight", head_.weight});
  params.push_back({"head.bias", head_.bias});
  params.push_back({"cb_head.weight", cb_head_.weight});
  params.push_back({"cb_head.bias", cb_head_.bias});
  return params;
}

}  // namespace wstan::model
