#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wstan/map/moment_map.hpp"
#include "wstan/random.hpp"
#include "wstan/span.hpp"

namespace wstan::data {

struct SynthConfig {
  std::size_t train_episodes = 500;
  std::size_t test_episodes = 100;
  std::size_t clips = 16;           // N
  std::size_t visual_dim = 16;      // d^V
  std::size_t events = 24;          // number of event prototypes
  std::size_t min_sentences = 2;    // n_p range
  std::size_t max_sentences = 3;
  std::size_t min_span = 3;         // event length in clips
  std::size_t max_span = 6;
  double noise = 0.1;               // sigma
  double prototype_scale = 0.5;     // per-dimension stddev of prototypes
  double min_duration = 20.0;       // seconds
  double max_duration = 40.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// An event type: its clip-feature prototype and the words describing it.
struct EventPrototype {
  std::size_t id = 0;
  std::vector<double> feature;
  std::string verb;
  std::string object;
  std::string modifier;  // may be empty

  std::string sentence() const;
};

/// One synthetic video with its paragraph. `gt_spans[k]` is the clip span
/// of `sentences[k]`; it is evaluation-only data.
struct Episode {
  std::string id;
  double duration = 0.0;
  map::ClipFeatures clips;
  std::vector<std::string> sentences;
  std::vector<Moment> gt_spans;

  bool operator==(const Episode&) const = default;
};

using Corpus = std::vector<Episode>;

struct CorpusSplits {
  Corpus train;
  Corpus test;
};

/// Prototypes with pairwise distance >= 1, all words drawn from fixed lists.
std::vector<EventPrototype> make_prototypes(const SynthConfig& config);

/// `count` episodes whose ids start with `prefix`; episode e uses the
/// sub-seed derive_seed(stream_seed, e).
Corpus gen_corpus(const SynthConfig& config,
                  const std::vector<EventPrototype>& prototypes,
                  std::uint64_t stream_seed, std::size_t count,
                  const std::string& prefix);

/// Train and test corpora from `config.seed`.
CorpusSplits gen_splits(const SynthConfig& config);

/// Training input for one visit of an episode. Carries no annotation.
struct TrainingPair {
  std::size_t video = 0;              // episode index providing the clips
  std::size_t paragraph_source = 0;   // episode index providing the text
  std::vector<std::string> sentences;
  int matched = 1;                    // y_m
};

/// Negative paragraph with probability 0.5 from a uniformly chosen other
/// episode; then one uniformly chosen sentence is dropped when at least two
/// remain.
TrainingPair make_training_pair(std::size_t video, const Corpus& corpus, Rng& rng);

/// JSON Lines, one episode per line:
/// {"id","duration","clips":[[...]],"sentences":[...],"gt_spans":[[i,j],...]}
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

/// Every distinct word of every sentence, in first-seen order.
std::vector<std::string> corpus_words(const Corpus& corpus);

}  // namespace wstan::data
