#include "wstan/text/vocabulary.hpp"

#include <cctype>
#include <fstream>

#include "wstan/error.hpp"

namespace wstan::text {

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kOovToken);
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = lookup_.find(token); it != lookup_.end()) return it->second;
  const std::size_t idx = tokens_.size();
  tokens_.push_back(token);
  lookup_.emplace(token, idx);
  return idx;
}

std::size_t Vocabulary::index(std::string_view token) const {
  if (auto it = lookup_.find(std::string(token)); it != lookup_.end())
    return it->second;
  return kOovIndex;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_of(" \t") != std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected a single token");
    if (v.index(line) != kOovIndex || line == kOovToken || line == kPadToken)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": duplicate or reserved token '" + line + "'");
    v.add(line);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  if (words.empty()) throw DataError("empty sentence after tokenization");
  return words;
}

std::vector<std::size_t> tokenize(std::string_view sentence,
                                  const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& w : split_words(sentence)) ids.push_back(vocab.index(w));
  return ids;
}

}  // namespace wstan::text
