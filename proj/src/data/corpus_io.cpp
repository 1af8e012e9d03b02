#include <fstream>
#include <string>

#include "json.hpp"
#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/data/synth.hpp"
#include "wstan/error.hpp"

namespace wstan::data {
namespace {

using nlohmann::json;

// Features are written by hand so that every double carries 17 significant
// digits; everything else goes through the JSON library.
std::string episode_line(const Episode& ep) {
  std::string line = "{\"id\":" + json(ep.id).dump() +
                     ",\"duration\":" + ad::format_double(ep.duration) + ",\"clips\":[";
  for (std::size_t c = 0; c < ep.clips.count; ++c) {
    if (c) line += ',';
    line += '[';
    const auto row = ep.clips.row(c);
    for (std::size_t d = 0; d < row.size(); ++d) {
      if (d) line += ',';
      line += ad::format_double(row[d]);
    }
    line += ']';
  }
  json spans = json::array();
  for (const auto& m : ep.gt_spans) spans.push_back({m.start, m.end});
  line += "],\"sentences\":" + json(ep.sentences).dump() +
          ",\"gt_spans\":" + spans.dump() + "}";
  return line;
}

Episode parse_episode(const std::string& line) {
  const json j = json::parse(line);
  Episode ep;
  ep.id = j.at("id").get<std::string>();
  ep.duration = j.at("duration").get<double>();
  const auto& clips = j.at("clips");
  if (!clips.is_array() || clips.empty()) throw DataError("clips must be a non-empty array");
  ep.clips.count = clips.size();
  ep.clips.dim = clips.front().size();
  if (ep.clips.dim == 0) throw DataError("clip features must be non-empty");
  for (const auto& row : clips) {
    if (row.size() != ep.clips.dim) throw DataError("ragged clip feature rows");
    for (const auto& v : row) ep.clips.values.push_back(v.get<double>());
  }
  ep.sentences = j.at("sentences").get<std::vector<std::string>>();
  for (const auto& s : j.at("gt_spans")) {
    if (s.size() != 2) throw DataError("gt span must be [start, end]");
    ep.gt_spans.push_back(Moment{s[0].get<std::size_t>(), s[1].get<std::size_t>()});
  }
  if (ep.gt_spans.size() != ep.sentences.size())
    throw DataError("one gt span per sentence required");
  for (const auto& m : ep.gt_spans)
    if (m.start > m.end || m.end >= ep.clips.count)
      throw DataError("gt span outside the clip range");
  return ep;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus: " + path.string());
  for (const auto& ep : corpus) out << episode_line(ep) << '\n';
  if (!out) throw IoError("failed writing corpus: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      corpus.push_back(parse_episode(line));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed episode: " + e.what());
    }
  }
  return corpus;
}

}  // namespace wstan::data
