#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wstan::text {

/// Dense token -> index table. Index 0 is padding, index 1 is
/// out-of-vocabulary; real tokens start at 2.
class Vocabulary {
 public:
  static constexpr std::size_t kPadIndex = 0;
  static constexpr std::size_t kOovIndex = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kOovToken = "<unk>";

  Vocabulary();

  /// Builds from words in first-seen order, skipping duplicates.
  static Vocabulary from_words(const std::vector<std::string>& words);

  /// One token per line; line number (0-based) = index - 2.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t add(const std::string& token);
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Lowercases, strips punctuation, splits on whitespace. Throws DataError
/// when nothing is left.
std::vector<std::string> split_words(std::string_view sentence);

/// split_words followed by vocabulary lookup.
std::vector<std::size_t> tokenize(std::string_view sentence,
                                  const Vocabulary& vocab);

}  // namespace wstan::text
