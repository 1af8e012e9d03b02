#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/error.hpp"
#include "wstan/pipeline/config.hpp"
#include "wstan/pipeline/evaluate.hpp"
#include "wstan/pipeline/train.hpp"

using namespace wstan;
using namespace wstan::pipeline;
namespace fs = std::filesystem;

namespace {

// A corpus small enough to train in well under a second per epoch.
RunConfig tiny() {
  RunConfig c;
  c.train_episodes = 12;
  c.test_episodes = 6;
  c.clips = 6;
  c.visual_dim = 4;
  c.events = 6;
  c.min_span = 1;
  c.max_span = 2;
  c.text_dim = 8;
  c.fused_dim = 4;
  c.tan_layers = 2;
  c.epochs = 2;
  c.lr = 1e-3;
  c.baseline_seeds = 2;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "wstan_pipeline_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing") {
  const auto c = parse_config("# comment\nlr = 0.002\n\nmap_backend = pool  # trailing\nsd_cb = 0\n");
  CHECK(c.lr == 0.002);
  CHECK(c.map_backend == "pool");
  CHECK_FALSE(c.sd_cb);
  CHECK_THROWS_AS(parse_config("learning_rate = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("lr 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("lr = fast"), ConfigError);

  RunConfig bad;
  bad.alpha = 0.6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.o_min = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.map_backend = "conv3d";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(RunConfig{}.validate());

  // Every key round-trips through its text form.
  RunConfig r;
  for (const auto& k : config_keys()) set_key(r, k.name, get_key(RunConfig{}, k.name));
  CHECK(canonical_config(r) == canonical_config(RunConfig{}));
  CHECK(parse_config(canonical_config(tiny())).epochs == 2);
}

TEST_CASE("base and full presets") {
  const auto b = RunConfig::base(), f = RunConfig::full();
  CHECK_FALSE(b.sd_mil);
  CHECK_FALSE(b.cb);
  CHECK_FALSE(b.sd_cb);
  CHECK(f.sd_mil);
  CHECK(f.cb);
  CHECK(f.sd_cb);
}

TEST_CASE("fingerprints") {
  RunConfig a, b;
  CHECK(data_fingerprint(a) == data_fingerprint(b));
  b.lr = 0.5;
  CHECK(data_fingerprint(a) == data_fingerprint(b));
  CHECK(model_fingerprint(a) != model_fingerprint(b));
  b = a;
  b.workers = 4;  // inference only
  CHECK(model_fingerprint(a) == model_fingerprint(b));
  b.noise = 0.2;
  CHECK(data_fingerprint(a) != data_fingerprint(b));
  CHECK(data_fingerprint(a).size() == 16);
}

TEST_CASE("base toggle keeps self-training off the tape") {
  auto cfg = tiny();
  const auto sp = data::gen_splits(cfg.synth());
  const auto vocab = build_vocabulary(sp.train);
  model::WstanModel m(cfg.model(vocab.size()), cfg.model_seed);
  std::vector<std::vector<std::size_t>> para;
  for (const auto& s : sp.train[0].sentences) para.push_back(text::tokenize(s, vocab));

  auto count_bce = [](const ad::Tape& t) {
    std::size_t n = 0;
    for (const auto& op : t.op_names()) n += op == "binary_cross_entropy";
    return n;
  };
  {
    const auto base = [&] { auto c = cfg; c.sd_mil = c.cb = c.sd_cb = false; return c; }();
    ad::Tape tape;
    const auto out = compute_step_losses(tape, m, sp.train[0].clips, para, 1, base);
    CHECK(count_bce(tape) == 1);  // MIL only
    CHECK_FALSE(out.parts.sd.defined());
    CHECK_FALSE(out.parts.cb.defined());
    CHECK_FALSE(out.parts.cb_sd.defined());
  }
  {
    ad::Tape tape;
    const auto out = compute_step_losses(tape, m, sp.train[0].clips, para, 1, cfg);
    CHECK(out.parts.sd.defined());
    CHECK(out.parts.cb.defined());
    CHECK(out.parts.cb_sd.defined());
    CHECK(count_bce(tape) == 1 + 3 * para.size());
  }
  {
    // Unmatched pairs gate everything but MIL.
    ad::Tape tape;
    const auto out = compute_step_losses(tape, m, sp.train[0].clips, para, 0, cfg);
    CHECK(count_bce(tape) == 1);
    CHECK(out.total.item() == cfg.alpha * out.parts.mil.item());
  }
}

TEST_CASE("training is deterministic and checkpoints reload") {
  const auto cfg = tiny();
  const auto sp = data::gen_splits(cfg.synth());
  const auto vocab = build_vocabulary(sp.train);

  auto run = [&](const fs::path& path) {
    model::WstanModel m(cfg.model(vocab.size()), cfg.model_seed);
    std::vector<double> epochs;
    const auto log = train_model(cfg, sp.train, vocab, m,
                                 [&](std::size_t, double mean) { epochs.push_back(mean); });
    CHECK(log.size() == cfg.epochs * sp.train.size());
    CHECK(epochs.size() == cfg.epochs);
    ad::save_checkpoint(path, make_checkpoint(cfg, m, vocab));
    return training_log_csv(log);
  };
  const auto log1 = run(scratch("a.ckpt"));
  const auto log2 = run(scratch("b.ckpt"));
  CHECK(log1 == log2);
  CHECK(slurp(scratch("a.ckpt")) == slurp(scratch("b.ckpt")));
  CHECK(log1.rfind("step,L_mil,L_sd,L_cb,L_cbsd,total,y_m\n", 0) == 0);

  const auto loaded = load_model(scratch("a.ckpt"));
  CHECK(model_fingerprint(loaded.config) == model_fingerprint(cfg));
  CHECK(loaded.data_fingerprint == data_fingerprint(cfg));
  CHECK(loaded.vocab.size() == vocab.size());
  EvalOptions opt;
  opt.baseline_seeds = 0;
  model::WstanModel fresh(cfg.model(vocab.size()), cfg.model_seed);
  train_model(cfg, sp.train, vocab, fresh);
  CHECK(evaluate(loaded.model, loaded.vocab, sp.test, opt).to_csv() ==
        evaluate(fresh, vocab, sp.test, opt).to_csv());

  // A tampered config no longer matches its fingerprint.
  auto text = slurp(scratch("a.ckpt"));
  const auto pos = text.find("config.lr");
  REQUIRE(pos != std::string::npos);
  text.insert(text.find('\n', pos), "1");
  std::ofstream(scratch("bad.ckpt"), std::ios::binary) << text;
  CHECK_THROWS_AS(load_model(scratch("bad.ckpt")), DataError);
}

TEST_CASE("evaluation does not depend on worker count") {
  const auto cfg = tiny();
  const auto sp = data::gen_splits(cfg.synth());
  const auto vocab = build_vocabulary(sp.train);
  model::WstanModel m(cfg.model(vocab.size()), cfg.model_seed);
  EvalOptions one;
  one.baseline_seeds = 2;
  EvalOptions four = one;
  four.workers = 4;
  std::vector<PredictionRecord> p1, p4;
  const auto r1 = evaluate(m, vocab, sp.test, one, &p1);
  const auto r4 = evaluate(m, vocab, sp.test, four, &p4);
  CHECK(r1.to_csv() == r4.to_csv());
  REQUIRE(p1.size() == p4.size());
  for (std::size_t q = 0; q < p1.size(); ++q) {
    CHECK(p1[q].episode == p4[q].episode);
    REQUIRE(p1[q].spans.size() == p4[q].spans.size());
    for (std::size_t s = 0; s < p1[q].spans.size(); ++s)
      CHECK(p1[q].spans[s].score == p4[q].spans[s].score);
  }
  // R@5 >= R@1 everywhere; N = 6 adds the segment rank protocol.
  for (double t : kReportIous) CHECK(r1.value("R", 5, t) >= r1.value("R", 1, t));
  CHECK_NOTHROW(r1.value("DiDeMo-Rank", 1));
  CHECK_NOTHROW(r1.value("random-R", 1, 0.5));
}

TEST_CASE("untrained model scores near the random baseline") {
  auto cfg = tiny();
  cfg.clips = 16;
  cfg.min_span = 3;
  cfg.max_span = 6;
  cfg.test_episodes = 60;
  const auto sp = data::gen_splits(cfg.synth());
  const auto vocab = build_vocabulary(sp.train);
  model::WstanModel m(cfg.model(vocab.size()), cfg.model_seed);
  EvalOptions opt;
  opt.baseline_seeds = 10;
  const auto r = evaluate(m, vocab, sp.test, opt);
  // An untrained map is nearly flat, so it behaves like some fixed ranking;
  // it must not look like a trained model.
  CHECK(r.value("R", 1, 0.5) < 3.0 * r.value("random-R", 1, 0.5) + 10.0);
}

TEST_CASE("heatmap and predictions files") {
  const std::vector<double> map{0.0, 1.0, 0.3, 0.5};
  CHECK(heatmap_pgm(map, 2) == "P2\n2 2\n255\n0 255\n0 128\n");

  std::vector<PredictionRecord> recs{{"test-00001", 1, {{{0.0, 2.5}, 0.75, {0, 0}}}}};
  write_predictions(scratch("p.jsonl"), recs);
  const auto text = slurp(scratch("p.jsonl"));
  CHECK(text.find("\"episode\":\"test-00001\"") != std::string::npos);
  CHECK(text.find("\"sentence\":1") != std::string::npos);
  CHECK(text.find("[0.0,2.5,0.75]") != std::string::npos);
}

}  // TEST_SUITE
