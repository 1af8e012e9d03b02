#include "wstan/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/error.hpp"

namespace wstan::pipeline {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                      value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

ConfigKey size_key(std::string name, KeyGroup g, std::string help, std::size_t RunConfig::*m) {
  return {name, g, std::move(help),
          [m](const RunConfig& c) { return std::to_string(c.*m); },
          [m, name](RunConfig& c, const std::string& v) { c.*m = parse_unsigned<std::size_t>(name, v); }};
}

ConfigKey seed_key(std::string name, KeyGroup g, std::string help, std::uint64_t RunConfig::*m) {
  return {name, g, std::move(help),
          [m](const RunConfig& c) { return std::to_string(c.*m); },
          [m, name](RunConfig& c, const std::string& v) { c.*m = parse_unsigned<std::uint64_t>(name, v); }};
}

ConfigKey real_key(std::string name, KeyGroup g, std::string help, double RunConfig::*m) {
  return {name, g, std::move(help),
          [m](const RunConfig& c) { return ad::format_double(c.*m); },
          [m, name](RunConfig& c, const std::string& v) { c.*m = parse_real(name, v); }};
}

ConfigKey bool_key(std::string name, KeyGroup g, std::string help, bool RunConfig::*m) {
  return {name, g, std::move(help),
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m, name](RunConfig& c, const std::string& v) { c.*m = parse_bool(name, v); }};
}

ConfigKey text_key(std::string name, KeyGroup g, std::string help, std::string RunConfig::*m) {
  return {name, g, std::move(help),
          [m](const RunConfig& c) { return c.*m; },
          [m](RunConfig& c, const std::string& v) { c.*m = v; }};
}

}  // namespace

void RunConfig::validate() const {
  synth().validate();
  model(2).validate();
  map::parse_backend(map_backend);
  ad::parse_activation(tan_activation);
  ad::parse_activation(map_activation);
  thresholds().validate();
  weights().validate();
  if (sd_cb && !cb) throw ConfigError("sd_cb requires cb (SD@CB applies to the complementary branch)");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (nms_threshold < 0.0 || nms_threshold > 1.0) throw ConfigError("nms_threshold must lie in [0, 1]");
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (text_dim < 2 || text_dim % 2) throw ConfigError("text_dim must be even and >= 2");
}

data::SynthConfig RunConfig::synth() const {
  data::SynthConfig s;
  s.train_episodes = train_episodes;
  s.test_episodes = test_episodes;
  s.clips = clips;
  s.visual_dim = visual_dim;
  s.events = events;
  s.min_sentences = min_sentences;
  s.max_sentences = max_sentences;
  s.min_span = min_span;
  s.max_span = max_span;
  s.noise = noise;
  s.seed = data_seed;
  return s;
}

model::ModelConfig RunConfig::model(std::size_t vocab_size) const {
  model::ModelConfig m;
  m.clips = clips;
  m.text_dim = text_dim;
  m.visual_dim = visual_dim;
  m.fused_dim = fused_dim;
  m.tan_layers = tan_layers;
  m.tan_kernel = tan_kernel;
  m.encoder_layers = encoder_layers;
  m.vocab_size = vocab_size;
  m.backend = map::parse_backend(map_backend);
  m.tan_activation = ad::parse_activation(tan_activation);
  m.map_activation = ad::parse_activation(map_activation);
  return m;
}

RunConfig RunConfig::base() {
  RunConfig c;
  c.sd_mil = false;
  c.cb = false;
  c.sd_cb = false;
  return c;
}

RunConfig RunConfig::full() { return RunConfig{}; }

const std::vector<ConfigKey>& config_keys() {
  using G = KeyGroup;
  static const std::vector<ConfigKey> keys = {
      size_key("train_episodes", G::kData, "training episodes", &RunConfig::train_episodes),
      size_key("test_episodes", G::kData, "test episodes", &RunConfig::test_episodes),
      size_key("clips", G::kData, "clips per video (N)", &RunConfig::clips),
      size_key("visual_dim", G::kData, "clip feature width (d^V)", &RunConfig::visual_dim),
      size_key("events", G::kData, "number of event prototypes", &RunConfig::events),
      size_key("min_sentences", G::kData, "smallest paragraph (n_p)", &RunConfig::min_sentences),
      size_key("max_sentences", G::kData, "largest paragraph (n_p)", &RunConfig::max_sentences),
      size_key("min_span", G::kData, "shortest event, clips", &RunConfig::min_span),
      size_key("max_span", G::kData, "longest event, clips", &RunConfig::max_span),
      real_key("noise", G::kData, "clip feature noise sigma", &RunConfig::noise),
      seed_key("data_seed", G::kData, "corpus seed", &RunConfig::data_seed),
      size_key("text_dim", G::kModel, "sentence vector width (d^S)", &RunConfig::text_dim),
      size_key("fused_dim", G::kModel, "fused feature width (d^F)", &RunConfig::fused_dim),
      size_key("tan_layers", G::kModel, "temporal adjacent conv layers (L)", &RunConfig::tan_layers),
      size_key("tan_kernel", G::kModel, "temporal adjacent kernel size (K, odd)", &RunConfig::tan_kernel),
      size_key("encoder_layers", G::kModel, "BiLSTM layers", &RunConfig::encoder_layers),
      text_key("map_backend", G::kModel, "moment map builder: stackconv | pool", &RunConfig::map_backend),
      text_key("tan_activation", G::kModel, "activation after each TAN layer", &RunConfig::tan_activation),
      text_key("map_activation", G::kModel, "activation inside the stacked-conv map", &RunConfig::map_activation),
      seed_key("model_seed", G::kModel, "parameter initialization seed", &RunConfig::model_seed),
      real_key("o_min", G::kObjective, "pseudo-label lower threshold", &RunConfig::o_min),
      real_key("o_max", G::kObjective, "pseudo-label upper threshold", &RunConfig::o_max),
      real_key("alpha", G::kObjective, "MIL loss weight", &RunConfig::alpha),
      real_key("beta", G::kObjective, "complementary loss weight", &RunConfig::beta),
      real_key("gamma", G::kObjective, "self-discriminating loss weight", &RunConfig::gamma),
      bool_key("sd_mil", G::kObjective, "self-discriminating loss on the matching map (SD@MIL)", &RunConfig::sd_mil),
      bool_key("cb", G::kObjective, "complementary branch (CB)", &RunConfig::cb),
      bool_key("sd_cb", G::kObjective, "self-discriminating loss on the CB map (SD@CB)", &RunConfig::sd_cb),
      real_key("lr", G::kOptimization, "Adam learning rate", &RunConfig::lr),
      size_key("epochs", G::kOptimization, "training epochs", &RunConfig::epochs),
      size_key("batch_size", G::kOptimization, "training pairs per Adam step", &RunConfig::batch_size),
      seed_key("train_seed", G::kOptimization, "pair sampling and shuffling seed", &RunConfig::train_seed),
      real_key("nms_threshold", G::kInference, "temporal NMS IoU threshold", &RunConfig::nms_threshold),
      size_key("workers", G::kInference, "evaluation threads (results do not depend on it)", &RunConfig::workers),
      size_key("baseline_seeds", G::kInference, "random-scoring baseline repeats (0 = skip)", &RunConfig::baseline_seeds),
  };
  return keys;
}

void set_key(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = config_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  it->set(config, value);
}

std::string get_key(const RunConfig& config, const std::string& key) {
  const auto& keys = config_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->get(config);
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    try {
      set_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string canonical_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + "=" + k.get(config) + "\n";
  return out;
}

std::string fingerprint(const RunConfig& config, const std::vector<KeyGroup>& groups) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (const auto& k : config_keys()) {
    if (std::find(groups.begin(), groups.end(), k.group) == groups.end()) continue;
    for (char c : k.name + "=" + k.get(config) + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string data_fingerprint(const RunConfig& config) {
  return fingerprint(config, {KeyGroup::kData});
}

std::string model_fingerprint(const RunConfig& config) {
  return fingerprint(config, {KeyGroup::kData, KeyGroup::kModel, KeyGroup::kObjective,
                              KeyGroup::kOptimization});
}

}  // namespace wstan::pipeline
