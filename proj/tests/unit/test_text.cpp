#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wstan/autodiff/grad_check.hpp"
#include "wstan/autodiff/ops.hpp"
#include "wstan/error.hpp"
#include "wstan/text/encoder.hpp"
#include "wstan/text/vocabulary.hpp"

using namespace wstan;

TEST_SUITE("text") {

TEST_CASE("vocabulary reserves pad and oov") {
  text::Vocabulary v;
  CHECK(v.size() == 2);
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(1) == "<unk>");
  CHECK(v.add("door") == 2);
  CHECK(v.add("door") == 2);
  CHECK(v.index("window") == text::Vocabulary::kOovIndex);
}

TEST_CASE("tokenize") {
  auto v = text::Vocabulary::from_words({"person", "opens", "the", "door"});
  CHECK(text::split_words("Person opens the door.") ==
        std::vector<std::string>{"person", "opens", "the", "door"});
  CHECK(text::tokenize("Person opens the door.", v) == std::vector<std::size_t>{2, 3, 4, 5});
  CHECK(text::tokenize("person closes", v) == std::vector<std::size_t>{2, 1});
  CHECK_THROWS_AS(text::tokenize("", v), DataError);
  CHECK_THROWS_AS(text::tokenize(" ?! ", v), DataError);
}

TEST_CASE("vocabulary file: line number is index - 2") {
  auto v = text::Vocabulary::from_words({"b", "a", "b", "c"});
  const auto path = std::filesystem::temp_directory_path() / "wstan_vocab_test.txt";
  v.save(path);
  std::ifstream in(path);
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l0 == "b");
  CHECK(l1 == "a");
  CHECK(l2 == "c");
  CHECK(text::Vocabulary::load(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("encoder shape, determinism and order sensitivity") {
  text::TextEncoder enc({10, 8, 1}, 42);
  text::TextEncoder twin({10, 8, 1}, 42);
  const std::vector<std::size_t> s{2, 3, 4, 5}, rev{5, 4, 3, 2}, one{7};
  ad::Tape tape;
  const auto h = enc.encode(tape, s);
  CHECK(h.shape() == ad::Shape{8});
  const auto h1 = enc.encode(tape, one);
  const auto h1b = twin.encode(tape, one);
  CHECK(std::vector<double>(h1.values().begin(), h1.values().end()) ==
        std::vector<double>(h1b.values().begin(), h1b.values().end()));
  const auto hr = enc.encode(tape, rev);
  CHECK(std::vector<double>(h.values().begin(), h.values().end()) !=
        std::vector<double>(hr.values().begin(), hr.values().end()));
  CHECK_THROWS_AS(enc.encode(tape, std::vector<std::size_t>{10}), DataError);
  CHECK_THROWS_AS(enc.encode(tape, std::vector<std::size_t>{}), DataError);
}

TEST_CASE("one-token sentence: both directions see the same single step") {
  // With a single token each direction runs exactly one LSTM cell from zero
  // state; recompute it by hand from the parameters.
  text::TextEncoder enc({6, 4, 1}, 3);
  const auto params = enc.parameters();
  auto find = [&](const std::string& name) {
    for (const auto& p : params)
      if (p.name == name) return p.tensor;
    FAIL("missing " << name);
    return ad::Tensor();
  };
  const auto emb = find("text.embedding");
  const std::size_t tok = 4, d = 4, h = 2;
  std::vector<double> x(emb.values().begin() + tok * d, emb.values().begin() + (tok + 1) * d);
  auto cell = [&](const std::string& dir) {
    const auto wi = find("text.lstm0." + dir + ".w_input");
    const auto b = find("text.lstm0." + dir + ".bias");
    std::vector<double> gate(4 * h);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = b.values()[r];
      for (std::size_t c = 0; c < d; ++c) acc += wi.values()[r * d + c] * x[c];
      gate[r] = acc;
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> out(h);
    for (std::size_t k = 0; k < h; ++k) {
      const double c = sig(gate[k]) * std::tanh(gate[2 * h + k]);  // f * c_prev = 0
      out[k] = sig(gate[3 * h + k]) * std::tanh(c);
    }
    return out;
  };
  ad::Tape tape;
  const auto enc_h = enc.encode(tape, std::vector<std::size_t>{tok});
  const auto fwd = cell("fwd"), bwd = cell("bwd");
  for (std::size_t k = 0; k < h; ++k) {
    CHECK(enc_h.values()[k] == doctest::Approx(fwd[k]).epsilon(1e-12));
    CHECK(enc_h.values()[h + k] == doctest::Approx(bwd[k]).epsilon(1e-12));
  }
}

TEST_CASE("encoder gradient check, three layers") {
  text::TextEncoder enc({7, 6, 3}, 8);
  const auto params = enc.parameters();
  const std::vector<std::size_t> s{2, 6, 3};
  auto prog = [&](ad::Tape& t) { return ad::sum(t, enc.encode(t, s)); };
  CHECK(ad::grad_check(prog, params).max_rel_error <= 1e-4);
}

TEST_CASE("initialisation ranges") {
  text::TextEncoder enc({12, 16, 1}, 1);
  for (const auto& p : enc.parameters()) {
    if (p.name == "text.embedding")
      for (double v : p.tensor.values()) CHECK(std::abs(v) <= 0.1);
  }
}

}  // TEST_SUITE
