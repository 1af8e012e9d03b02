#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/data/synth.hpp"
#include "wstan/loss/losses.hpp"
#include "wstan/model/wstan_model.hpp"
#include "wstan/pipeline/config.hpp"
#include "wstan/text/vocabulary.hpp"

namespace wstan::pipeline {

/// One row of the training log. Components that were not computed for the
/// step are unset.
struct TrainLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::optional<double> mil;
  std::optional<double> sd;
  std::optional<double> cb;
  std::optional<double> cb_sd;
  double total = 0.0;
  int matched = 1;
};

/// Forward pass and enabled loss terms for one training pair.
struct StepLosses {
  loss::LossComponents parts;
  ad::Tensor total;
};

StepLosses compute_step_losses(ad::Tape& tape, const model::WstanModel& model,
                               const map::ClipFeatures& clips,
                               const std::vector<std::vector<std::size_t>>& sentences,
                               int matched, const RunConfig& config);

using EpochCallback = std::function<void(std::size_t epoch, double mean_total)>;

/// Trains `model` in place. Deterministic for fixed config seeds.
/// Throws NumericError naming the step and loss component on NaN/inf.
std::vector<TrainLogRow> train_model(const RunConfig& config, const data::Corpus& train,
                                     const text::Vocabulary& vocab, model::WstanModel& model,
                                     const EpochCallback& on_epoch = {});

/// CSV: step,L_mil,L_sd,L_cb,L_cbsd,total,y_m
std::string training_log_csv(const std::vector<TrainLogRow>& rows);

/// Vocabulary built from the words of a training corpus.
text::Vocabulary build_vocabulary(const data::Corpus& corpus);

ad::Checkpoint make_checkpoint(const RunConfig& config, const model::WstanModel& model,
                               const text::Vocabulary& vocab);

struct LoadedModel {
  RunConfig config;
  text::Vocabulary vocab;
  model::WstanModel model;
  std::string data_fingerprint;
};

/// Rebuilds config, vocabulary and model from a checkpoint. Throws
/// DataError when the embedded fingerprint does not match the embedded
/// config.
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace wstan::pipeline
