#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wstan/autodiff/adam.hpp"
#include "wstan/autodiff/checkpoint.hpp"
#include "wstan/autodiff/grad_check.hpp"
#include "wstan/autodiff/ops.hpp"
#include "wstan/error.hpp"
#include "wstan/grid_mask.hpp"
#include "wstan/random.hpp"

using namespace wstan;
using namespace wstan::ad;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }
std::vector<double> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("tensor shape contract") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({0}, {}), DimensionError);
  Tensor t({2, 2}, {1, 2, 3, 4}, true);
  CHECK(t.size() == 4);
  CHECK(t.grad().size() == 4);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
}

TEST_CASE("affine examples") {
  Tape tape;
  Tensor x({2}, {1, 0});
  Tensor w({2, 2}, {2, 3, 4, 5});
  Tensor b({2}, {0, 0});
  CHECK(vals(affine(tape, x, w, b)) == std::vector<double>{2, 4});

  Tensor x3({1}, {3}), w3({1, 1}, {2}), b3({1}, {1});
  CHECK(vals(affine(tape, x3, w3, b3)) == std::vector<double>{7});

  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor xr({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(vals(affine(tape, xr, eye, Tensor::zeros({2}))) == vals(xr));

  Tensor bad({2, 3}, std::vector<double>(6, 1.0));
  try {
    affine(tape, x, bad, b);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    // Both shapes are named.
    CHECK(std::string(e.what()).find("[2]") != std::string::npos);
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("hadamard examples") {
  Tape tape;
  Tensor a({2}, {1, 2}), b({2}, {3, 4});
  CHECK(vals(hadamard(tape, a, b)) == std::vector<double>{3, 8});
  CHECK(vals(hadamard(tape, a, Tensor({2}, {1, 1}))) == vals(a));
  CHECK(vals(hadamard(tape, Tensor::zeros({2}), b)) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(hadamard(tape, a, Tensor::zeros({3})), DimensionError);
}

TEST_CASE("activations at reference points") {
  Tape tape;
  Tensor x({1}, {0.0}, true);
  Tensor s = sigmoid(tape, x);
  CHECK(s.item() == 0.5);
  tape.backward(s);
  CHECK(x.grad()[0] == 0.25);

  Tape t2;
  x.zero_grad();
  Tensor th = tanh(t2, x);
  CHECK(th.item() == 0.0);
  t2.backward(th);
  CHECK(x.grad()[0] == 1.0);

  Tape t3;
  Tensor neg({1}, {-1.0}, true);
  Tensor r = relu(t3, neg);
  CHECK(r.item() == 0.0);
  t3.backward(r);
  CHECK(neg.grad()[0] == 0.0);
}

TEST_CASE("sigmoid is stable for large inputs") {
  Tape tape;
  Tensor x({2}, {-800.0, 800.0});
  const auto y = vals(sigmoid(tape, x));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 1.0);
}

TEST_CASE("max_reduce") {
  Tape tape;
  Tensor x({3}, {0.1, 0.9, 0.3}, true);
  const std::vector<std::uint8_t> all{1, 1, 1};
  auto r = max_reduce(tape, x, all);
  CHECK(r.value.item() == 0.9);
  CHECK(r.arg == 1);

  Tensor tie({4}, {0.5, 0.7, 0.7, 0.2});
  CHECK(max_reduce(tape, tie, std::vector<std::uint8_t>{1, 1, 1, 1}).arg == 1);

  // The global max is hidden; brute-force scan over the visible entries.
  const std::vector<std::uint8_t> hide{1, 0, 1};
  auto m = max_reduce(tape, x, hide);
  double best = -1;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < 3; ++i)
    if (hide[i] && x.values()[i] > best) best = x.values()[i], arg = i;
  CHECK(m.value.item() == best);
  CHECK(m.arg == arg);

  CHECK_THROWS_AS(max_reduce(tape, x, std::vector<std::uint8_t>{0, 0, 0}), PreconditionError);
}

TEST_CASE("max_reduce routes gradient to a single entry") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({4, 4}, uniform_values(rng, 16, -1, 1), true);
    Tape tape;
    auto r = max_reduce(tape, x, GridMask::upper_triangle(4).valid);
    tape.backward(scale(tape, r.value, 3.0));
    double off = 0.0;
    for (std::size_t i = 0; i < 16; ++i)
      if (i != r.arg) off += std::abs(x.grad()[i]);
    CHECK(off == 0.0);
    CHECK(x.grad()[r.arg] == 3.0);
  }
}

TEST_CASE("backward semantics") {
  Tensor x({1}, {3.0}, true);
  {
    Tape tape;
    Tensor loss = hadamard(tape, x, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == 6.0);
    // Repeating without reset doubles the leaf gradient.
    tape.backward(loss);
    CHECK(x.grad()[0] == 12.0);
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor loss = add(tape, sum(tape, x), sum(tape, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
  }
  {
    Tape tape;
    Tensor v({2}, {1, 2}, true);
    Tensor y = scale(tape, v, 2.0);
    CHECK_THROWS_AS(tape.backward(y), PreconditionError);
  }
}

TEST_CASE("non-finite values name the op") {
  Tape tape;
  Tensor x({1}, {1e308}, true);
  try {
    scale(tape, x, 1e10);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
}

TEST_CASE("recorded order is topological") {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  Tensor a = scale(tape, x, 2.0);
  Tensor b = hadamard(tape, a, x);
  Tensor c = sum(tape, b);
  CHECK(tape.op_names() == std::vector<std::string>{"scale", "hadamard", "sum"});
  (void)c;
}

TEST_CASE("bit-identical reruns") {
  auto run = [] {
    Rng rng(5);
    Tensor x({3, 4}, uniform_values(rng, 12, -1, 1), true);
    Tensor w({2, 4}, uniform_values(rng, 8, -1, 1), true);
    Tape tape;
    Tensor loss = sum(tape, sigmoid(tape, linear(tape, x, w)));
    tape.backward(loss);
    return std::make_pair(loss.item(), grads(w));
  };
  CHECK(run() == run());
}

TEST_CASE("grad_check harness") {
  Rng rng(3);
  Tensor x({2, 3}, uniform_values(rng, 6, -1, 1), true);
  Tensor w({4, 3}, uniform_values(rng, 12, -1, 1), true);
  Tensor b({4}, uniform_values(rng, 4, -1, 1), true);
  const NamedTensor in[] = {{"x", x}, {"w", w}, {"b", b}};
  auto affine_prog = [&](Tape& t) { return sum(t, affine(t, x, w, b)); };
  CHECK(grad_check(affine_prog, in).max_rel_error <= 1e-4);

  auto chain = [&](Tape& t) { return sum(t, sigmoid(t, sigmoid(t, affine(t, x, w, b)))); };
  const auto r = grad_check(chain, in);
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(r.checked == 6 + 12 + 4);

  // Strict max with a gap far larger than h.
  Tensor m({3}, {0.1, 0.9, 0.3}, true);
  const NamedTensor mi[] = {{"m", m}};
  auto maxp = [&](Tape& t) {
    return max_reduce(t, m, std::vector<std::uint8_t>{1, 1, 1}).value;
  };
  CHECK(grad_check(maxp, mi).max_rel_error <= 1e-4);

  Tensor frozen({1}, {1.0});
  const NamedTensor fi[] = {{"frozen", frozen}};
  CHECK_THROWS_AS(grad_check([&](Tape& t) { return sum(t, frozen); }, fi), PreconditionError);
}

TEST_CASE("conv2d_masked examples") {
  const GridMask tri3 = GridMask::upper_triangle(3);
  Rng rng(9);
  Tensor map({3, 3, 2}, uniform_values(rng, 18, -1, 1));
  Tape tape;
  // K=1 identity channel map reproduces the masked input.
  Tensor eye({1, 1, 2, 2}, {1, 0, 0, 1});
  const auto y = vals(conv2d_masked(tape, map, eye, tri3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < 2; ++c)
        CHECK(y[(i * 3 + j) * 2 + c] == (j >= i ? map.values()[(i * 3 + j) * 2 + c] : 0.0));

  Tensor k3({3, 3, 2, 2}, uniform_values(rng, 36, -1, 1));
  for (double v : vals(conv2d_masked(tape, Tensor::zeros({3, 3, 2}), k3, tri3))) CHECK(v == 0.0);

  CHECK_THROWS_AS(conv2d_masked(tape, map, Tensor::zeros({2, 2, 2, 2}), tri3), ConfigError);
}

TEST_CASE("conv2d_masked N=2 K=3 against a sliding-window sum") {
  const GridMask tri2 = GridMask::upper_triangle(2);
  Tensor map({2, 2, 1}, {1.0, 2.0, 100.0, 3.0});  // 100 sits below the diagonal
  Tensor k({3, 3, 1, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tape tape;
  const auto y = vals(conv2d_masked(tape, map, k, tri2));
  // Oracle: zero the masked input, slide the window with zero padding.
  const double in[2][2] = {{1.0, 2.0}, {0.0, 3.0}};
  const double kk[3][3] = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const int r = i + a - 1, c = j + b - 1;
          if (r >= 0 && r < 2 && c >= 0 && c < 2) acc += in[r][c] * kk[a][b];
        }
      CHECK(y[i * 2 + j] == doctest::Approx(j >= i ? acc : 0.0).epsilon(1e-15));
    }
  CHECK(y[2] == 0.0);
}

TEST_CASE("adam") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  {
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.0, 0.0};
    AdamState s;
    adam_step(p, g, s, cfg);
    CHECK(p == std::vector<double>{1.0, -2.0});
  }
  {
    // Step 1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    std::vector<double> p{1.0, 1.0};
    const std::vector<double> g{0.5, -3.0};
    AdamState s;
    adam_step(p, g, s, cfg);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)));
    CHECK(p[1] == doctest::Approx(1.0 + 0.01 * 3.0 / (3.0 + 1e-8)));
    const double v1 = s.v[0];
    adam_step(p, g, s, cfg);
    CHECK(s.v[0] > v1);
    CHECK(s.step == 2);
  }
  CHECK_THROWS_AS(Adam({}, AdamConfig{0.0}), ConfigError);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(21);
  Checkpoint ck;
  ck.meta = {{"fingerprint", "abc"}, {"note", "two words"}};
  ck.tensors = {{"a", Tensor({2, 3}, normal_values(rng, 6, 1e3), true)},
                {"b", Tensor({1}, {0.1}, true)},
                {"c", Tensor({4}, {1e-300, -0.0, 5e-324, 1.0 / 3.0}, true)}};
  const auto path = std::filesystem::temp_directory_path() / "wstan_ckpt_test.txt";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.tensors[i].name == ck.tensors[i].name);
    CHECK(back.tensors[i].tensor.shape() == ck.tensors[i].tensor.shape());
    CHECK(vals(back.tensors[i].tensor) == vals(ck.tensors[i].tensor));
  }
  REQUIRE(back.find_meta("note"));
  CHECK(*back.find_meta("note") == "two words");

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "WSTAN-CKPT v1");

  std::ofstream(path) << "WSTAN-CKPT v1\ntensor a 1 3\n1 2\n";
  try {
    load_checkpoint(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("restore_parameters checks names and shapes") {
  Checkpoint ck;
  ck.tensors = {{"w", Tensor({2}, {1, 2})}};
  std::vector<NamedTensor> ok{{"w", Tensor::zeros({2}, true)}};
  restore_parameters(ck, ok);
  CHECK(vals(ok[0].tensor) == std::vector<double>{1, 2});
  std::vector<NamedTensor> missing{{"v", Tensor::zeros({2}, true)}};
  CHECK_THROWS_AS(restore_parameters(ck, missing), DataError);
  std::vector<NamedTensor> shape{{"w", Tensor::zeros({3}, true)}};
  CHECK_THROWS_AS(restore_parameters(ck, shape), DataError);
}

}  // TEST_SUITE
