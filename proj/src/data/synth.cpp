#include "wstan/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "wstan/error.hpp"
#include "wstan/text/vocabulary.hpp"

namespace wstan::data {
namespace {

constexpr std::array<const char*, 12> kVerbs = {
    "opens", "closes", "holds", "washes", "throws", "lifts",
    "pours", "cleans", "carries", "drops", "takes", "fixes"};
constexpr std::array<const char*, 12> kObjects = {
    "door", "window", "cup", "book", "laptop", "towel",
    "bag", "phone", "box", "shoe", "broom", "pillow"};
constexpr std::array<const char*, 12> kModifiers = {
    "slowly", "quickly", "again", "carefully", "twice", "briefly",
    "outside", "inside", "nearby", "loudly", "quietly", "happily"};

// Uniform integer in [lo, hi].
std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

void SynthConfig::validate() const {
  if (clips == 0 || visual_dim == 0) throw ConfigError("N and d^V must be >= 1");
  if (events == 0 || events > kVerbs.size() * kObjects.size())
    throw ConfigError("event count must be in [1, " +
                      std::to_string(kVerbs.size() * kObjects.size()) + "]");
  if (min_sentences == 0 || min_sentences > max_sentences)
    throw ConfigError("need 1 <= min_sentences <= max_sentences");
  if (max_sentences > events)
    throw ConfigError("max_sentences exceeds the number of distinct events");
  if (min_span == 0 || min_span > max_span)
    throw ConfigError("need 1 <= min_span <= max_span");
  if (noise < 0.0) throw ConfigError("noise must be >= 0");
  if (!(min_duration > 0.0) || min_duration > max_duration)
    throw ConfigError("need 0 < min_duration <= max_duration");
}

std::string EventPrototype::sentence() const {
  std::string s = "person " + verb + " the " + object;
  if (!modifier.empty()) s += " " + modifier;
  return s;
}

std::vector<EventPrototype> make_prototypes(const SynthConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 0xe7e7));
  std::vector<std::size_t> pairs(kVerbs.size() * kObjects.size());
  std::iota(pairs.begin(), pairs.end(), std::size_t{0});
  std::shuffle(pairs.begin(), pairs.end(), rng);

  std::vector<EventPrototype> protos;
  protos.reserve(config.events);
  for (std::size_t e = 0; e < config.events; ++e) {
    EventPrototype p;
    p.id = e;
    p.verb = kVerbs[pairs[e] / kObjects.size()];
    p.object = kObjects[pairs[e] % kObjects.size()];
    if (uniform_index(rng, 0, 1) == 1) p.modifier = kModifiers[uniform_index(rng, 0, kModifiers.size() - 1)];
    // Rejection sampling keeps every pair at least 1.0 apart.
    for (int attempt = 0;; ++attempt) {
      if (attempt == 10000)
        throw DataError("cannot place separated event prototypes; raise prototype_scale");
      p.feature = normal_values(rng, config.visual_dim, config.prototype_scale);
      const bool separated = std::all_of(protos.begin(), protos.end(), [&](const auto& q) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < config.visual_dim; ++k)
          d2 += (p.feature[k] - q.feature[k]) * (p.feature[k] - q.feature[k]);
        return std::sqrt(d2) >= 1.0;
      });
      if (separated) break;
    }
    protos.push_back(std::move(p));
  }
  return protos;
}

Corpus gen_corpus(const SynthConfig& config,
                  const std::vector<EventPrototype>& prototypes,
                  std::uint64_t stream_seed, std::size_t count,
                  const std::string& prefix) {
  config.validate();
  const std::size_t n = config.clips;
  if (config.max_sentences * config.min_span > n)
    throw DataError("cannot fit " + std::to_string(config.max_sentences) +
                    " events of at least " + std::to_string(config.min_span) +
                    " clips into " + std::to_string(n) + " clips");
  if (prototypes.size() < config.max_sentences)
    throw DataError("not enough event prototypes for the paragraph size");

  Corpus corpus(count);
  const auto total = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ep = 0; ep < total; ++ep) {
    const auto e = static_cast<std::size_t>(ep);
    Rng rng(derive_seed(stream_seed, e));
    Episode episode;
    char id[64];
    std::snprintf(id, sizeof id, "%s-%05zu", prefix.c_str(), e);
    episode.id = id;
    episode.duration = std::uniform_real_distribution<double>(
        config.min_duration, config.max_duration)(rng);

    const std::size_t np = uniform_index(rng, config.min_sentences, config.max_sentences);
    std::vector<std::size_t> lengths(np);
    for (int attempt = 0;; ++attempt) {
      for (auto& len : lengths) len = uniform_index(rng, config.min_span, config.max_span);
      if (std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}) <= n) break;
      if (attempt == 100) {
        std::fill(lengths.begin(), lengths.end(), config.min_span);
        break;
      }
    }
    // Spread the free clips over the np + 1 gaps around the events.
    const std::size_t free = n - std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
    std::vector<std::size_t> gaps(np + 1, 0);
    for (std::size_t f = 0; f < free; ++f) ++gaps[uniform_index(rng, 0, np)];

    std::vector<std::size_t> events(prototypes.size());
    std::iota(events.begin(), events.end(), std::size_t{0});
    for (std::size_t k = 0; k < np; ++k)
      std::swap(events[k], events[uniform_index(rng, k, events.size() - 1)]);

    episode.clips = map::ClipFeatures{
        n, config.visual_dim,
        config.noise > 0.0 ? normal_values(rng, n * config.visual_dim, config.noise)
                           : std::vector<double>(n * config.visual_dim, 0.0)};
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < np; ++k) {
      cursor += gaps[k];
      const auto& proto = prototypes[events[k]];
      for (std::size_t c = cursor; c < cursor + lengths[k]; ++c)
        for (std::size_t d = 0; d < config.visual_dim; ++d)
          episode.clips.values[c * config.visual_dim + d] += proto.feature[d];
      episode.sentences.push_back(proto.sentence());
      episode.gt_spans.push_back(Moment{cursor, cursor + lengths[k] - 1});
      cursor += lengths[k];
    }
    corpus[e] = std::move(episode);
  }
  return corpus;
}

CorpusSplits gen_splits(const SynthConfig& config) {
  const auto protos = make_prototypes(config);
  return CorpusSplits{
      gen_corpus(config, protos, derive_seed(config.seed, 0x7a11), config.train_episodes, "train"),
      gen_corpus(config, protos, derive_seed(config.seed, 0x7e57), config.test_episodes, "test")};
}

TrainingPair make_training_pair(std::size_t video, const Corpus& corpus, Rng& rng) {
  if (corpus.size() < 2)
    throw DataError("negative sampling needs at least two episodes");
  if (video >= corpus.size()) throw PreconditionError("episode index out of range");
  TrainingPair pair;
  pair.video = video;
  pair.paragraph_source = video;
  if (std::bernoulli_distribution(0.5)(rng)) {
    std::size_t other = uniform_index(rng, 0, corpus.size() - 2);
    if (other >= video) ++other;
    pair.paragraph_source = other;
    pair.matched = 0;
  }
  pair.sentences = corpus[pair.paragraph_source].sentences;
  if (pair.sentences.size() >= 2) {
    const std::size_t drop = uniform_index(rng, 0, pair.sentences.size() - 1);
    pair.sentences.erase(pair.sentences.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return pair;
}

std::vector<std::string> corpus_words(const Corpus& corpus) {
  std::vector<std::string> words;
  text::Vocabulary seen;
  for (const auto& ep : corpus)
    for (const auto& s : ep.sentences)
      for (auto& w : text::split_words(s))
        if (seen.index(w) == text::Vocabulary::kOovIndex) {
          seen.add(w);
          words.push_back(std::move(w));
        }
  return words;
}

}  // namespace wstan::data
