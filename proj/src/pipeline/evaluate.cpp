#include "wstan/pipeline/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "wstan/error.hpp"
#include "wstan/map/moment_map.hpp"

namespace wstan::pipeline {
namespace {

std::vector<std::vector<double>> episode_maps(const model::WstanModel& model,
                                              const map::ClipFeatures& clips,
                                              std::span<const std::vector<std::size_t>> sentences,
                                              bool use_cb) {
  ad::Tape tape;
  const auto maps = model.forward(tape, clips, sentences, use_cb);
  const auto& chosen = use_cb ? maps.cb_maps : maps.maps;
  std::vector<std::vector<double>> out;
  out.reserve(chosen.size());
  for (const auto& m : chosen) out.emplace_back(m.values().begin(), m.values().end());
  return out;
}

Span truth_span(const data::Episode& ep, std::size_t k, std::size_t clips) {
  const Moment& m = ep.gt_spans.at(k);
  return map::moment_to_span(m.start, m.end, clips, ep.duration);
}

}  // namespace

std::vector<double> predict_map(const model::WstanModel& model, const map::ClipFeatures& clips,
                                const std::vector<std::size_t>& tokens, bool use_cb) {
  const std::vector<std::vector<std::size_t>> one{tokens};
  return episode_maps(model, clips, one, use_cb).front();
}

eval::MetricsReport evaluate(const model::WstanModel& model, const text::Vocabulary& vocab,
                             const data::Corpus& corpus, const EvalOptions& options,
                             std::vector<PredictionRecord>* predictions) {
  const std::size_t n = model.config().clips;
  const GridMask& mask = model.mask();
  if (corpus.empty()) throw DataError("evaluation corpus is empty");

  // Query slots are laid out up front so workers write disjoint entries and
  // the merge below is order-independent of scheduling.
  std::vector<std::size_t> offset(corpus.size() + 1, 0);
  std::vector<std::vector<std::vector<std::size_t>>> tokens(corpus.size());
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    const auto& ep = corpus[e];
    if (ep.clips.count != n)
      throw DataError("episode " + ep.id + " has " + std::to_string(ep.clips.count) +
                      " clips, model expects " + std::to_string(n));
    if (ep.gt_spans.size() != ep.sentences.size())
      throw DataError("episode " + ep.id + " has mismatched sentences and spans");
    for (const auto& s : ep.sentences) tokens[e].push_back(text::tokenize(s, vocab));
    offset[e + 1] = offset[e] + ep.sentences.size();
  }
  const std::size_t queries = offset.back();
  if (queries == 0) throw DataError("evaluation corpus has no sentences");

  std::vector<eval::RankedPrediction> full(queries);
  std::vector<eval::RankedPrediction> kept(queries);
  std::exception_ptr failure;
  const long episodes = static_cast<long>(corpus.size());
  const int threads = static_cast<int>(std::max<std::size_t>(1, options.workers));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long e = 0; e < episodes; ++e) {
    try {
      const auto& ep = corpus[static_cast<std::size_t>(e)];
      const auto maps = episode_maps(model, ep.clips, tokens[static_cast<std::size_t>(e)],
                                     options.use_cb);
      for (std::size_t k = 0; k < maps.size(); ++k) {
        const std::size_t q = offset[static_cast<std::size_t>(e)] + k;
        full[q] = eval::rank_moments(maps[k], mask, ep.duration);
        kept[q] = eval::nms(full[q], options.nms_threshold);
      }
    } catch (...) {
#pragma omp critical(wstan_eval_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<eval::GroundedSample> samples;
  samples.reserve(queries);
  for (std::size_t e = 0; e < corpus.size(); ++e)
    for (std::size_t k = 0; k < corpus[e].sentences.size(); ++k)
      samples.push_back({kept[offset[e] + k], truth_span(corpus[e], k, n)});

  eval::MetricsReport report;
  report.samples = queries;
  report.fingerprint = options.fingerprint;
  for (std::size_t k : kReportKs)
    for (double t : kReportIous) report.add("R", k, t, eval::recall_at_k(samples, k, t));
  report.add("mIoU", 1, std::nullopt, eval::mean_iou(samples));

  if (n == 6) {
    // Ranks are taken over all 21 candidates before NMS. Each query carries
    // one annotation, so the best-matched-three rule reduces to it.
    // Spans are re-expressed on the protocol's fixed 5-second segments.
    auto seg = [](std::size_t i, std::size_t j) {
      return Span{5.0 * static_cast<double>(i), 5.0 * static_cast<double>(j + 1)};
    };
    std::size_t hits1 = 0, hits5 = 0;
    for (std::size_t e = 0; e < corpus.size(); ++e)
      for (std::size_t k = 0; k < corpus[e].sentences.size(); ++k) {
        eval::RankedPrediction ranked = full[offset[e] + k];
        for (auto& s : ranked) s.span = seg(s.moment.start, s.moment.end);
        const Moment& gt = corpus[e].gt_spans[k];
        const std::vector<Span> ann{seg(gt.start, gt.end)};
        hits1 += eval::didemo_rank_at_k(ranked, ann, 1);
        hits5 += eval::didemo_rank_at_k(ranked, ann, 5);
      }
    const double denom = static_cast<double>(queries);
    report.add("DiDeMo-Rank", 1, std::nullopt, 100.0 * static_cast<double>(hits1) / denom);
    report.add("DiDeMo-Rank", 5, std::nullopt, 100.0 * static_cast<double>(hits5) / denom);
    report.notes.push_back("DiDeMo rank uses the single annotation of each query");
  }

  if (options.baseline_seeds > 0)
    for (std::size_t k : kReportKs)
      for (double t : kReportIous)
        report.add("random-R", k, t,
                   corpus_random_baseline(corpus, n, k, t, options.nms_threshold,
                                          options.baseline_seeds, options.baseline_seed));

  if (predictions) {
    predictions->clear();
    for (std::size_t e = 0; e < corpus.size(); ++e)
      for (std::size_t k = 0; k < corpus[e].sentences.size(); ++k)
        predictions->push_back({corpus[e].id, k, kept[offset[e] + k]});
  }
  return report;
}

double corpus_random_baseline(const data::Corpus& corpus, std::size_t clips, std::size_t k,
                              double iou, double nms_threshold, std::size_t repeats,
                              std::uint64_t seed) {
  std::vector<eval::QueryGeometry> queries;
  for (const auto& ep : corpus)
    for (std::size_t s = 0; s < ep.gt_spans.size(); ++s)
      queries.push_back({ep.duration, truth_span(ep, s, clips)});
  return eval::random_baseline_recall(queries, GridMask::upper_triangle(clips), k, iou,
                                      nms_threshold, repeats, seed);
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["episode"] = r.episode;
    j["sentence"] = r.sentence;
    auto spans = nlohmann::json::array();
    for (const auto& s : r.spans) spans.push_back({s.span.start, s.span.end, s.score});
    j["spans"] = std::move(spans);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string heatmap_pgm(const std::vector<double>& score_map, std::size_t n) {
  if (score_map.size() != n * n) throw PreconditionError("heatmap needs an N*N map");
  std::ostringstream os;
  os << "P2\n" << n << ' ' << n << "\n255\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = j >= i ? std::clamp(score_map[i * n + j], 0.0, 1.0) : 0.0;
      os << (j ? " " : "") << static_cast<int>(std::lround(255.0 * p));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace wstan::pipeline
