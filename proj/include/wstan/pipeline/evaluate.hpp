#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wstan/data/synth.hpp"
#include "wstan/eval/metrics.hpp"
#include "wstan/eval/report.hpp"
#include "wstan/model/wstan_model.hpp"
#include "wstan/text/vocabulary.hpp"

namespace wstan::pipeline {

inline constexpr double kReportIous[] = {0.1, 0.3, 0.5, 0.7};
inline constexpr std::size_t kReportKs[] = {1, 5};

struct EvalOptions {
  double nms_threshold = 0.5;
  std::size_t workers = 1;
  bool use_cb = true;              // score with the complementary head
  std::size_t baseline_seeds = 10; // 0 skips the random baseline rows
  std::uint64_t baseline_seed = 7;
  std::string fingerprint;
};

struct PredictionRecord {
  std::string episode;
  std::size_t sentence = 0;
  eval::RankedPrediction spans;  // post-NMS
};

/// Final score map of one (video, sentence) query as N*N values.
std::vector<double> predict_map(const model::WstanModel& model,
                                const map::ClipFeatures& clips,
                                const std::vector<std::size_t>& tokens, bool use_cb);

/// Scores every (episode, sentence) query independently and reports
/// R@{1,5} at IoU {0.1, 0.3, 0.5, 0.7}, mIoU and, when enabled, the random
/// baseline through the same path. Results do not depend on `workers`.
eval::MetricsReport evaluate(const model::WstanModel& model, const text::Vocabulary& vocab,
                             const data::Corpus& corpus, const EvalOptions& options,
                             std::vector<PredictionRecord>* predictions = nullptr);

/// Random-scoring R@k over every query of `corpus`.
double corpus_random_baseline(const data::Corpus& corpus, std::size_t clips, std::size_t k,
                              double iou, double nms_threshold, std::size_t repeats,
                              std::uint64_t seed);

/// JSON Lines: {"episode","sentence","spans":[[start,end,score],...]}
void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);

/// Plain PGM (P2), N x N, value round(255 p); cells below the diagonal are 0.
std::string heatmap_pgm(const std::vector<double>& score_map, std::size_t n);

}  // namespace wstan::pipeline
