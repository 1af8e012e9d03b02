#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wstan/data/synth.hpp"
#include "wstan/loss/losses.hpp"
#include "wstan/model/wstan_model.hpp"

namespace wstan::pipeline {

/// Every tunable of a run. Each field has a default and a flat key.
struct RunConfig {
  // data
  std::size_t train_episodes = 500;
  std::size_t test_episodes = 100;
  std::size_t clips = 16;
  std::size_t visual_dim = 16;
  std::size_t events = 24;
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 3;
  std::size_t min_span = 3;
  std::size_t max_span = 6;
  double noise = 0.1;
  std::uint64_t data_seed = 7;
  // model
  std::size_t text_dim = 64;
  std::size_t fused_dim = 32;
  std::size_t tan_layers = 4;
  std::size_t tan_kernel = 3;
  std::size_t encoder_layers = 1;
  std::string map_backend = "stackconv";
  std::string tan_activation = "relu";
  std::string map_activation = "identity";
  std::uint64_t model_seed = 7;
  // objective
  double o_min = 0.9;
  double o_max = 1.0;
  double alpha = 0.5;
  double beta = 0.25;
  double gamma = 0.25;
  bool sd_mil = true;   // SD@MIL
  bool cb = true;       // complementary branch
  bool sd_cb = true;    // SD@CB
  // optimization
  double lr = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 1;
  std::uint64_t train_seed = 7;
  // inference
  double nms_threshold = 0.5;
  std::size_t workers = 1;
  std::size_t baseline_seeds = 10;

  void validate() const;

  data::SynthConfig synth() const;
  model::ModelConfig model(std::size_t vocab_size) const;
  loss::Thresholds thresholds() const { return {o_min, o_max}; }
  loss::LossWeights weights() const { return {alpha, beta, gamma}; }

  /// "Base" = matching classifier only; "Full" = all components.
  static RunConfig base();
  static RunConfig full();
};

enum class KeyGroup { kData, kModel, kObjective, kOptimization, kInference };

struct ConfigKey {
  std::string name;
  KeyGroup group;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

/// All keys in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from text. Throws ConfigError for unknown keys or bad values.
void set_key(RunConfig& config, const std::string& key, const std::string& value);
std::string get_key(const RunConfig& config, const std::string& key);

/// Flat `key = value` lines; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical `key=value` listing of every key, one per line.
std::string canonical_config(const RunConfig& config);

/// Stable 64-bit hash (hex) of the canonical form of the keys in `groups`.
std::string fingerprint(const RunConfig& config, const std::vector<KeyGroup>& groups);
std::string data_fingerprint(const RunConfig& config);
/// Everything that influences a trained checkpoint.
std::string model_fingerprint(const RunConfig& config);

}  // namespace wstan::pipeline
