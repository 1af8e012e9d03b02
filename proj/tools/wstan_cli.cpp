// wstan command-line front end.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/data/synth.hpp"
#include "wstan/error.hpp"
#include "wstan/map/moment_map.hpp"
#include "wstan/pipeline/config.hpp"
#include "wstan/pipeline/evaluate.hpp"
#include "wstan/pipeline/gradcheck_suite.hpp"
#include "wstan/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace wstan;
using pipeline::KeyGroup;
using pipeline::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct ConfigArgs {
  std::string file;
  std::map<std::string, std::string> overrides;
};

/// Adds --config and one --<key> flag per config key in `groups`.
void add_config_options(CLI::App* app, ConfigArgs& args, const std::vector<KeyGroup>& groups,
                        bool with_file = true) {
  if (with_file) app->add_option("--config", args.file, "key=value config file");
  for (const auto& key : pipeline::config_keys()) {
    if (std::find(groups.begin(), groups.end(), key.group) == groups.end()) continue;
    const std::string name = key.name;
    app->add_option_function<std::string>(
           "--" + name, [&args, name](const std::string& v) { args.overrides[name] = v; },
           key.help)
        ->type_name("VALUE");
  }
}

RunConfig resolve(const ConfigArgs& args, RunConfig base = {}) {
  RunConfig config = args.file.empty() ? base : pipeline::load_config(args.file, base);
  for (const auto& [k, v] : args.overrides) pipeline::set_key(config, k, v);
  config.validate();
  return config;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

void require_data_fingerprint(const fs::path& data_dir, const std::string& expected) {
  const std::string found = trim(read_text(data_dir / "fingerprint"));
  if (found != expected)
    throw DataError("corpus in " + data_dir.string() + " has data fingerprint " + found +
                    ", the configuration expects " + expected);
}

std::vector<KeyGroup> all_groups() {
  return {KeyGroup::kData, KeyGroup::kModel, KeyGroup::kObjective, KeyGroup::kOptimization,
          KeyGroup::kInference};
}

const char* group_name(KeyGroup g) {
  switch (g) {
    case KeyGroup::kData: return "data";
    case KeyGroup::kModel: return "model";
    case KeyGroup::kObjective: return "objective";
    case KeyGroup::kOptimization: return "optimization";
    case KeyGroup::kInference: return "inference";
  }
  return "";
}

int cmd_defaults(const ConfigArgs& args) {
  const RunConfig config = resolve(args);
  int last = -1;
  for (const auto& key : pipeline::config_keys()) {
    if (static_cast<int>(key.group) != last) {
      std::cout << (last < 0 ? "" : "\n") << "# " << group_name(key.group) << '\n';
      last = static_cast<int>(key.group);
    }
    std::cout << key.name << " = " << key.get(config) << "    # " << key.help << '\n';
  }
  return kExitOk;
}

int cmd_gen_data(const ConfigArgs& args, const fs::path& out) {
  const RunConfig config = resolve(args);
  if (!fs::is_directory(out)) throw IoError("output directory does not exist: " + out.string());
  const auto splits = data::gen_splits(config.synth());
  data::save_corpus(splits.train, out / "train.jsonl");
  data::save_corpus(splits.test, out / "test.jsonl");
  write_text(out / "fingerprint", pipeline::data_fingerprint(config) + "\n");
  write_text(out / "config.txt", pipeline::canonical_config(config));
  std::cout << "wrote " << splits.train.size() << " train / " << splits.test.size()
            << " test episodes to " << out.string() << " (data fingerprint "
            << pipeline::data_fingerprint(config) << ")\n";
  return kExitOk;
}

int cmd_train(const ConfigArgs& args, const fs::path& data_dir, const fs::path& ckpt_path,
              std::string log_path, bool quiet) {
  const RunConfig config = resolve(args);
  require_data_fingerprint(data_dir, pipeline::data_fingerprint(config));
  const data::Corpus train = data::load_corpus(data_dir / "train.jsonl");
  const text::Vocabulary vocab = pipeline::build_vocabulary(train);
  model::WstanModel model(config.model(vocab.size()), config.model_seed);

  const auto log = pipeline::train_model(
      config, train, vocab, model, [&](std::size_t epoch, double mean) {
        if (!quiet)
          std::fprintf(stderr, "epoch %zu/%zu  mean loss %.6f\n", epoch + 1, config.epochs, mean);
      });
  ad::save_checkpoint(ckpt_path, pipeline::make_checkpoint(config, model, vocab));
  vocab.save(ckpt_path.string() + ".vocab");
  if (log_path.empty()) log_path = ckpt_path.string() + ".log.csv";
  write_text(log_path, pipeline::training_log_csv(log));
  std::cout << "checkpoint " << ckpt_path.string() << " (fingerprint "
            << pipeline::model_fingerprint(config) << "), log " << log_path << '\n';
  return kExitOk;
}

int cmd_eval(const ConfigArgs& args, const fs::path& ckpt_path, const fs::path& data_dir,
             const std::string& split, const std::string& out_prefix) {
  auto loaded = pipeline::load_model(ckpt_path);
  const RunConfig config = resolve(args, loaded.config);
  require_data_fingerprint(data_dir, loaded.data_fingerprint);
  const data::Corpus corpus = data::load_corpus(data_dir / (split + ".jsonl"));

  pipeline::EvalOptions options;
  options.nms_threshold = config.nms_threshold;
  options.workers = config.workers;
  options.use_cb = config.cb;
  options.baseline_seeds = config.baseline_seeds;
  options.baseline_seed = config.train_seed;
  options.fingerprint = pipeline::model_fingerprint(loaded.config);
  std::vector<pipeline::PredictionRecord> predictions;
  const auto report = pipeline::evaluate(loaded.model, loaded.vocab, corpus, options, &predictions);

  const std::string prefix = out_prefix.empty() ? ckpt_path.string() + "." + split : out_prefix;
  report.write(prefix + ".metrics.csv", prefix + ".metrics.json");
  pipeline::write_predictions(prefix + ".predictions.jsonl", predictions);
  std::cout << report.to_csv();
  return kExitOk;
}

map::ClipFeatures load_video(const fs::path& path, std::size_t clips, double& duration) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const bool has_frames = j.contains("frames");
  if (!has_frames && !j.contains("clips"))
    throw DataError(path.string() + ": expected a \"frames\" or \"clips\" array");
  if (!j.contains("duration") || !j["duration"].is_number())
    throw DataError(path.string() + ": missing numeric \"duration\"");
  duration = j["duration"].get<double>();
  if (!(duration > 0.0)) throw DataError(path.string() + ": duration must be positive");
  map::FeatureMatrix rows;
  for (const auto& row : j[has_frames ? "frames" : "clips"]) {
    if (!row.is_array() || row.empty()) throw DataError(path.string() + ": malformed feature row");
    if (rows.count == 0) rows.dim = row.size();
    if (row.size() != rows.dim) throw DataError(path.string() + ": ragged feature rows");
    for (const auto& v : row) rows.values.push_back(v.get<double>());
    ++rows.count;
  }
  if (!has_frames && rows.count != clips)
    throw DataError(path.string() + ": expected " + std::to_string(clips) + " clips, got " +
                    std::to_string(rows.count));
  return has_frames ? map::pool_clips(rows, clips) : rows;
}

int cmd_infer(const fs::path& ckpt_path, const fs::path& video, const std::string& sentence,
              const std::string& heatmap, bool use_matching_head) {
  auto loaded = pipeline::load_model(ckpt_path);
  const std::size_t n = loaded.model.config().clips;
  double duration = 0.0;
  const auto clips = load_video(video, n, duration);
  if (clips.dim != loaded.model.config().visual_dim)
    throw DataError("video features have dimension " + std::to_string(clips.dim) +
                    ", model expects " + std::to_string(loaded.model.config().visual_dim));
  const auto tokens = text::tokenize(sentence, loaded.vocab);
  const bool use_cb = loaded.config.cb && !use_matching_head;
  const auto scores = pipeline::predict_map(loaded.model, clips, tokens, use_cb);
  const auto ranked = eval::rank_moments(scores, loaded.model.mask(), duration);
  const auto& top = ranked.front();
  std::printf("start %.3f end %.3f score %.6f moment %zu %zu\n", top.span.start, top.span.end,
              top.score, top.moment.start, top.moment.end);
  if (!heatmap.empty()) write_text(heatmap, pipeline::heatmap_pgm(scores, n));
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t points, bool inject) {
  pipeline::GradCheckOptions options;
  options.seed = seed;
  options.points = points;
  auto cases = pipeline::default_gradcheck_cases();
  if (inject) cases.push_back(pipeline::wrong_gradient_case());
  const auto report = pipeline::run_gradcheck_suite(cases, options);
  std::cout << report.to_text();
  return report.passed() ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised temporal grounding: data, training, evaluation, inference"};
  app.require_subcommand(1);

  ConfigArgs defaults_args;
  auto* defaults = app.add_subcommand("defaults", "Print every config key with its value");
  add_config_options(defaults, defaults_args, all_groups());

  ConfigArgs gen_args;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic train/test corpus");
  add_config_options(gen, gen_args, all_groups());
  gen->add_option("--out", gen_out, "Existing output directory")->required();

  ConfigArgs train_args;
  std::string train_data, train_ckpt, train_log;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "Train a model on a generated corpus");
  add_config_options(train, train_args, all_groups());
  train->add_option("--data", train_data, "Corpus directory from gen-data")->required();
  train->add_option("--out", train_ckpt, "Checkpoint path")->required();
  train->add_option("--log", train_log, "Training log CSV (default <out>.log.csv)");
  train->add_flag("--quiet", train_quiet, "No per-epoch progress");

  ConfigArgs eval_args;
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  add_config_options(evalc, eval_args, {KeyGroup::kInference}, false);
  evalc->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  evalc->add_option("--data", eval_data, "Corpus directory from gen-data")->required();
  evalc->add_option("--split", eval_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  evalc->add_option("--out", eval_out, "Output prefix (default <ckpt>.<split>)");

  std::string infer_ckpt, infer_video, infer_sentence, infer_heatmap;
  bool infer_matching = false;
  auto* infer = app.add_subcommand("infer", "Ground one sentence in one video");
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
  infer->add_option("--video", infer_video,
                    "JSON with \"duration\" and \"frames\" or \"clips\" feature rows")
      ->required();
  infer->add_option("--sentence", infer_sentence, "Query sentence")->required();
  infer->add_option("--heatmap", infer_heatmap, "Write the score map as a P2 PGM image");
  infer->add_flag("--matching-head", infer_matching,
                  "Score with the matching head even when the complementary branch exists");

  std::uint64_t gc_seed = 7;
  std::size_t gc_points = 25;
  bool gc_inject = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  gradcheck->add_option("--seed", gc_seed, "Seed for the random check points");
  gradcheck->add_option("--points", gc_points, "Random points per case");
  gradcheck->add_flag("--inject-wrong-gradient", gc_inject,
                      "Add an op with a deliberately wrong backward pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*defaults) return cmd_defaults(defaults_args);
    if (*gen) return cmd_gen_data(gen_args, gen_out);
    if (*train) return cmd_train(train_args, train_data, train_ckpt, train_log, train_quiet);
    if (*evalc) return cmd_eval(eval_args, eval_ckpt, eval_data, eval_split, eval_out);
    if (*infer) return cmd_infer(infer_ckpt, infer_video, infer_sentence, infer_heatmap,
                                 infer_matching);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_points, gc_inject);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const PreconditionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
