#include <cmath>

#include "../oracles.hpp"
#include "doctest.h"
#include "wstan/error.hpp"
#include "wstan/loss/losses.hpp"
#include "wstan/random.hpp"

using namespace wstan;
using loss::Thresholds;

namespace {

std::vector<double> random_map(Rng& rng, std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m[i * n + j] = u(rng);
  return m;
}

double bce(double p, double y) {
  p = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

ad::Tensor map_tensor(std::vector<double> v, std::size_t n, bool trainable = false) {
  return ad::Tensor({n, n}, std::move(v), trainable);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("iou examples") {
  CHECK(loss::iou({2, 6}, {4, 8}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(loss::iou({1, 3}, {1, 3}) == 1.0);
  CHECK(loss::iou({0, 1}, {2, 3}) == 0.0);
  CHECK(loss::iou({0, 1}, {1, 2}) == 0.0);
  CHECK_THROWS_AS(loss::iou({2, 2}, {0, 1}), PreconditionError);
  CHECK_THROWS_AS(loss::iou({0, 1}, {3, 1}), PreconditionError);
}

TEST_CASE("truncate examples") {
  const Thresholds th{0.9, 1.0};
  CHECK(loss::truncate_iou(0.95, th) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(loss::truncate_iou(0.9, th) == 0.0);
  CHECK(loss::truncate_iou(1.0, th) == 1.0);
  CHECK(loss::truncate_iou(0.3, {0.2, 0.6}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS((Thresholds{0.5, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((Thresholds{-0.1, 0.5}.validate()), ConfigError);
}

TEST_CASE("pseudo labels match the brute-force oracle") {
  Rng rng(2024);
  std::size_t boundary_hits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    auto m = random_map(rng, n);
    // Thresholds drawn from IoU values that actually occur on this grid, so
    // both boundaries get exercised.
    std::vector<double> occurring;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b)
        occurring.push_back(oracle::iou({0, double(b - a + 1)}, {0, double(n)}));
    std::sort(occurring.begin(), occurring.end());
    Thresholds th{0.9, 1.0};
    if (trial % 2 && occurring.size() >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, occurring.size() - 2);
      const std::size_t lo = pick(rng);
      th = {occurring[lo], occurring.back()};
      if (!(th.lower < th.upper)) th = {0.5, 1.0};
    }
    if (trial % 7 == 0) m[0] = m[n - 1] = 2.0;  // tie: lowest row-major wins
    const auto got = loss::pseudo_labels(m, GridMask::upper_triangle(n), th);
    const auto ref = oracle::pseudo_labels(m, n, th.lower, th.upper);
    CHECK(got.labels == ref.y);
    CHECK(got.weight == ref.w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double o = oracle::iou({double(i), double(j + 1)},
                                     {double(got.arg_start), double(got.arg_end + 1)});
        boundary_hits += o == th.lower || o == th.upper;
      }
  }
  CHECK(boundary_hits > 0);
}

TEST_CASE("pseudo label examples") {
  const GridMask m2 = GridMask::upper_triangle(2);
  const auto p = loss::pseudo_labels(std::vector<double>{0.2, 0.7, 0.0, 0.4}, m2, {0.4, 0.6});
  CHECK(p.arg_start == 0);
  CHECK(p.arg_end == 1);
  CHECK(p.weight == 0.7);
  // [0,1) and [1,2) each have IoU 1/2 with [0,2): (0.5 - 0.4) / 0.2.
  CHECK(p.labels[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.labels[1] == 1.0);
  CHECK(p.labels[2] == 0.0);
  CHECK(p.labels[3] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(loss::pseudo_labels(std::vector<double>(3, 0.0), m2, {}), DimensionError);
}

TEST_CASE("mil loss examples") {
  ad::Tape tape;
  CHECK(loss::mil_loss(tape, ad::Tensor::scalar(0.5), 1).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss::mil_loss(tape, ad::Tensor::scalar(0.5), 0).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss::mil_loss(tape, ad::Tensor::scalar(0.8), 1).item() ==
        doctest::Approx(-std::log(0.8)).epsilon(1e-12));
  CHECK(loss::mil_loss(tape, ad::Tensor::scalar(0.8), 0).item() ==
        doctest::Approx(-std::log(0.2)).epsilon(1e-12));
  // Saturated inputs stay finite.
  CHECK(std::isfinite(loss::mil_loss(tape, ad::Tensor::scalar(1.0), 0).item()));
  CHECK(std::isfinite(loss::mil_loss(tape, ad::Tensor::scalar(0.0), 1).item()));
}

TEST_CASE("soft cross entropy examples") {
  ad::Tape tape;
  const GridMask m1 = GridMask::upper_triangle(1);
  const std::vector<double> one{1.0};
  CHECK(loss::soft_ce_loss(tape, map_tensor({0.5}, 1), one, 1.0, m1).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss::soft_ce_loss(tape, map_tensor({0.3}, 1), one, 0.0, m1).item() == 0.0);

  const GridMask m2 = GridMask::upper_triangle(2);
  const std::vector<double> y{0.0, 1.0, 0.0, 0.0};
  // Exact 0/1 agreement; only the clamp remains.
  CHECK(loss::soft_ce_loss(tape, map_tensor({0.0, 1.0, 0.0, 0.0}, 2), y, 1.0, m2).item() < 1e-6);
  // Masked cell ignored; C = 3.
  const double expect = 0.6 / 3.0 * (bce(0.2, 0.0) + bce(0.7, 1.0) + bce(0.4, 0.0));
  CHECK(loss::soft_ce_loss(tape, map_tensor({0.2, 0.7, 0.9, 0.4}, 2), y, 0.6, m2).item() ==
        doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("sd loss hand case and paragraph averaging") {
  ad::Tape tape;
  const GridMask m2 = GridMask::upper_triangle(2);
  const Thresholds th{0.4, 0.6};
  const std::vector<ad::Tensor> one{map_tensor({0.2, 0.7, 0.0, 0.4}, 2)};
  // Labels {0.5, 1, -, 0.5}, w = 0.7, C = 3.
  const double hand = 0.7 / 3.0 * (bce(0.2, 0.5) + bce(0.7, 1.0) + bce(0.4, 0.5));
  const double single = loss::sd_loss(tape, one, m2, th).item();
  CHECK(single == doctest::Approx(hand).epsilon(1e-13));

  const std::vector<ad::Tensor> twice{one[0], one[0]};
  CHECK(loss::sd_loss(tape, twice, m2, th).item() == doctest::Approx(single).epsilon(1e-14));

  Rng rng(3);
  std::vector<ad::Tensor> para;
  for (int k = 0; k < 3; ++k) para.push_back(map_tensor(random_map(rng, 4), 4));
  const GridMask m4 = GridMask::upper_triangle(4);
  const std::vector<ad::Tensor> perm{para[2], para[0], para[1]};
  CHECK(loss::sd_loss(tape, para, m4, {}).item() ==
        doctest::Approx(loss::sd_loss(tape, perm, m4, {}).item()).epsilon(1e-14));
  CHECK_THROWS_AS(loss::sd_loss(tape, std::vector<ad::Tensor>{}, m4, {}), PreconditionError);
}

TEST_CASE("cb losses hand cases") {
  ad::Tape tape;
  const GridMask m2 = GridMask::upper_triangle(2);
  const Thresholds th{0.4, 0.6};
  const std::vector<ad::Tensor> src{map_tensor({0.2, 0.7, 0.0, 0.4}, 2)};
  const std::vector<ad::Tensor> cb{map_tensor({0.6, 0.3, 0.0, 0.1}, 2)};
  const double hand = 0.7 / 3.0 * (bce(0.6, 0.5) + bce(0.3, 1.0) + bce(0.1, 0.5));
  CHECK(loss::cb_loss(tape, src, cb, m2, th).item() == doctest::Approx(hand).epsilon(1e-13));

  // cb_sd takes its labels from the cb map: argmax (0,0), IoU with (0,1) is
  // 1/2 and with (1,1) is 0.
  const double self = 0.6 / 3.0 * (bce(0.6, 1.0) + bce(0.3, 0.5) + bce(0.1, 0.0));
  CHECK(loss::cb_sd_loss(tape, cb, m2, th).item() == doctest::Approx(self).epsilon(1e-13));

  // Uniform cb map: the tie goes to (0,0).
  const std::vector<ad::Tensor> flat{map_tensor({0.5, 0.5, 0.0, 0.5}, 2)};
  const double uniform = 0.5 / 3.0 * (bce(0.5, 1.0) + bce(0.5, 0.5) + bce(0.5, 0.0));
  CHECK(loss::cb_sd_loss(tape, flat, m2, th).item() == doctest::Approx(uniform).epsilon(1e-13));

  const std::vector<ad::Tensor> quiet{map_tensor({1e-9, 1e-9, 0.0, 1e-9}, 2)};
  CHECK(loss::cb_loss(tape, quiet, cb, m2, th).item() < 1e-8);
  const std::vector<ad::Tensor> two{cb[0], cb[0]};
  CHECK_THROWS_AS(loss::cb_loss(tape, src, two, m2, th), PreconditionError);
}

TEST_CASE("labels carry no gradient") {
  // Perturbing a non-argmax entry must match a frozen-label evaluation.
  const GridMask m3 = GridMask::upper_triangle(3);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto base = random_map(rng, 3);
    auto frozen = loss::pseudo_labels(base, m3, {0.3, 0.8});
    auto pert = base;
    const std::size_t cell = frozen.arg_start * 3 + frozen.arg_end == 1 ? 2 : 1;
    pert[cell] += 1e-3;
    if (loss::pseudo_labels(pert, m3, {0.3, 0.8}).arg_start != frozen.arg_start ||
        loss::pseudo_labels(pert, m3, {0.3, 0.8}).arg_end != frozen.arg_end)
      continue;
    ad::Tape tape;
    const std::vector<ad::Tensor> live{map_tensor(pert, 3)};
    const double a = loss::sd_loss(tape, live, m3, {0.3, 0.8}).item();
    const double b = loss::soft_ce_loss(tape, live[0], frozen.labels, frozen.weight, m3).item();
    CHECK(a == doctest::Approx(b).epsilon(1e-14));

    // And the analytic gradient is the prediction-side term only.
    auto t = map_tensor(base, 3, true);
    ad::Tape g;
    const std::vector<ad::Tensor> in{t};
    g.backward(loss::sd_loss(g, in, m3, {0.3, 0.8}));
    const double p = base[cell], y = frozen.labels[cell];
    const double expect = frozen.weight / 6.0 * (p - y) / (p * (1.0 - p));
    CHECK(t.grad()[cell] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("total loss examples and gating") {
  ad::Tape tape;
  const loss::LossWeights w{0.5, 0.25, 0.25};
  loss::LossComponents c{ad::Tensor::scalar(0.2), {}, {}, {}};
  CHECK(loss::total_loss(tape, c, w, 0).item() == doctest::Approx(0.1).epsilon(1e-15));
  loss::LossComponents all{ad::Tensor::scalar(0.4), ad::Tensor::scalar(0.2),
                           ad::Tensor::scalar(0.1), ad::Tensor::scalar(0.3)};
  CHECK(loss::total_loss(tape, all, w, 1).item() == doctest::Approx(0.35).epsilon(1e-14));
  loss::LossComponents zero{ad::Tensor::scalar(0), ad::Tensor::scalar(0),
                            ad::Tensor::scalar(0), ad::Tensor::scalar(0)};
  CHECK(loss::total_loss(tape, zero, w, 1).item() == 0.0);

  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    loss::LossComponents r{ad::Tensor::scalar(u(rng)), ad::Tensor::scalar(u(rng)),
                           ad::Tensor::scalar(u(rng)), ad::Tensor::scalar(u(rng))};
    const double a = 0.1 + 0.8 * u(rng) / 3.0;
    const loss::LossWeights wt{a, (1 - a) / 2, 1 - a - (1 - a) / 2};
    CHECK(loss::total_loss(tape, r, wt, 0).item() == a * r.mil.item());
  }
}

TEST_CASE("weight validation") {
  CHECK_NOTHROW((loss::LossWeights{0.5, 0.25, 0.25}.validate()));
  CHECK_THROWS_AS((loss::LossWeights{0.5, 0.5, 0.25}.validate()), ConfigError);
  CHECK_THROWS_AS((loss::LossWeights{1.2, -0.1, -0.1}.validate()), ConfigError);
  ad::Tape tape;
  loss::LossComponents c{ad::Tensor::scalar(0.2), {}, {}, {}};
  CHECK_THROWS_AS(loss::total_loss(tape, c, {0.6, 0.3, 0.3}, 0), ConfigError);
}

}  // TEST_SUITE
