#include "wstan/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wstan/autodiff/adam.hpp"
#include "wstan/error.hpp"
#include "wstan/random.hpp"

namespace wstan::pipeline {
namespace {

template <typename Fn>
ad::Tensor guarded(const char* component, Fn&& fn) {
  try {
    ad::Tensor t = fn();
    if (!std::isfinite(t.item()))
      throw NumericError("non-finite loss value");
    return t;
  } catch (const NumericError& e) {
    throw NumericError(std::string("loss component ") + component + ": " + e.what());
  }
}

std::optional<double> value_of(const ad::Tensor& t) {
  if (!t.defined()) return std::nullopt;
  return t.item();
}

}  // namespace

StepLosses compute_step_losses(ad::Tape& tape, const model::WstanModel& model,
                               const map::ClipFeatures& clips,
                               const std::vector<std::vector<std::size_t>>& sentences,
                               int matched, const RunConfig& config) {
  const auto& mask = model.mask();
  const auto th = config.thresholds();
  model::ParagraphMaps maps;
  try {
    maps = model.forward(tape, clips, sentences, config.cb);
  } catch (const NumericError& e) {
    throw NumericError(std::string("forward pass: ") + e.what());
  }

  StepLosses out;
  out.parts.mil = guarded("L_mil", [&] {
    const auto score = model::matching_score(tape, maps.maps, mask);
    return loss::mil_loss(tape, score.value, matched);
  });
  // Pseudo-label terms only apply to matched pairs; otherwise they are not
  // built at all.
  if (matched) {
    if (config.sd_mil)
      out.parts.sd = guarded("L_sd", [&] { return loss::sd_loss(tape, maps.maps, mask, th); });
    if (config.cb)
      out.parts.cb = guarded("L_cb", [&] {
        return loss::cb_loss(tape, maps.maps, maps.cb_maps, mask, th);
      });
    if (config.cb && config.sd_cb)
      out.parts.cb_sd = guarded("L_cbsd", [&] {
        return loss::cb_sd_loss(tape, maps.cb_maps, mask, th);
      });
  }
  out.total = guarded("total", [&] {
    return loss::total_loss(tape, out.parts, config.weights(), matched);
  });
  return out;
}

text::Vocabulary build_vocabulary(const data::Corpus& corpus) {
  return text::Vocabulary::from_words(data::corpus_words(corpus));
}

std::vector<TrainLogRow> train_model(const RunConfig& config, const data::Corpus& train,
                                     const text::Vocabulary& vocab, model::WstanModel& model,
                                     const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() < 2) throw DataError("training needs at least two episodes");

  ad::Adam optimizer(model.parameters(), ad::AdamConfig{config.lr});
  optimizer.zero_grad();

  std::vector<TrainLogRow> log;
  std::size_t step = 0;
  std::size_t pending = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.train_seed, 2 * epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng pair_rng(derive_seed(config.train_seed, 2 * epoch + 1));

    double epoch_total = 0.0;
    for (std::size_t video : order) {
      const data::TrainingPair pair = data::make_training_pair(video, train, pair_rng);
      std::vector<std::vector<std::size_t>> sentences;
      sentences.reserve(pair.sentences.size());
      for (const auto& s : pair.sentences) sentences.push_back(text::tokenize(s, vocab));

      ad::Tape tape;
      StepLosses losses;
      try {
        losses = compute_step_losses(tape, model, train[video].clips, sentences,
                                     pair.matched, config);
        tape.backward(losses.total);
      } catch (const NumericError& e) {
        throw NumericError("training step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + "): " + e.what());
      }

      TrainLogRow row;
      row.step = step;
      row.epoch = epoch;
      row.mil = value_of(losses.parts.mil);
      row.sd = value_of(losses.parts.sd);
      row.cb = value_of(losses.parts.cb);
      row.cb_sd = value_of(losses.parts.cb_sd);
      row.total = losses.total.item();
      row.matched = pair.matched;
      log.push_back(row);
      epoch_total += row.total;

      ++step;
      if (++pending == config.batch_size) {
        optimizer.step();
        optimizer.zero_grad();
        pending = 0;
      }
    }
    if (on_epoch) on_epoch(epoch, epoch_total / static_cast<double>(train.size()));
  }
  if (pending > 0) optimizer.step();
  return log;
}

std::string training_log_csv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream os;
  os << "step,L_mil,L_sd,L_cb,L_cbsd,total,y_m\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) os << ad::format_double(*v);
  };
  for (const auto& r : rows) {
    os << r.step << ',';
    cell(r.mil);
    os << ',';
    cell(r.sd);
    os << ',';
    cell(r.cb);
    os << ',';
    cell(r.cb_sd);
    os << ',' << ad::format_double(r.total) << ',' << r.matched << '\n';
  }
  return os.str();
}

ad::Checkpoint make_checkpoint(const RunConfig& config, const model::WstanModel& model,
                               const text::Vocabulary& vocab) {
  ad::Checkpoint ckpt;
  ckpt.meta.emplace_back("fingerprint", model_fingerprint(config));
  ckpt.meta.emplace_back("data_fingerprint", data_fingerprint(config));
  for (const auto& key : config_keys())
    ckpt.meta.emplace_back("config." + key.name, key.get(config));
  std::string words;
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    if (!words.empty()) words += ' ';
    words += vocab.token(i);
  }
  ckpt.meta.emplace_back("vocabulary", words);
  ckpt.tensors = model.parameters();
  return ckpt;
}

LoadedModel load_model(const std::filesystem::path& path) {
  const ad::Checkpoint ckpt = ad::load_checkpoint(path);
  RunConfig config;
  for (const auto& [key, value] : ckpt.meta)
    if (key.rfind("config.", 0) == 0) set_key(config, key.substr(7), value);
  const std::string* fp = ckpt.find_meta("fingerprint");
  if (!fp || *fp != model_fingerprint(config))
    throw DataError(path.string() + ": checkpoint fingerprint does not match its config");
  const std::string* words = ckpt.find_meta("vocabulary");
  if (!words) throw DataError(path.string() + ": checkpoint has no vocabulary");
  text::Vocabulary vocab;
  std::istringstream ws(*words);
  for (std::string w; ws >> w;) vocab.add(w);

  model::WstanModel model(config.model(vocab.size()), config.model_seed);
  auto params = model.parameters();
  ad::restore_parameters(ckpt, params);
  return LoadedModel{config, std::move(vocab), std::move(model), data_fingerprint(config)};
}

}  // namespace wstan::pipeline
