#include "wstan/pipeline/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "wstan/autodiff/ops.hpp"
#include "wstan/error.hpp"
#include "wstan/grid_mask.hpp"
#include "wstan/loss/losses.hpp"
#include "wstan/map/moment_map.hpp"
#include "wstan/model/wstan_model.hpp"
#include "wstan/random.hpp"
#include "wstan/text/encoder.hpp"

namespace wstan::pipeline {
namespace {

using ad::NamedTensor;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

Tensor rand_param(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = ad::numel(shape);
  return Tensor(std::move(shape), uniform_values(rng, n, lo, hi), true);
}

Tensor rand_const(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = ad::numel(shape);
  return Tensor(std::move(shape), uniform_values(rng, n, lo, hi), false);
}

/// sum(y * r) for a fixed random r, so every output entry gets a distinct
/// upstream gradient.
Tensor project(Tape& tape, const Tensor& y, const Tensor& r) {
  return ad::sum(tape, ad::hadamard(tape, y, r));
}

// Tiny model geometry used by the composite cases.
constexpr std::size_t kN = 4;
constexpr std::size_t kTextDim = 8;
constexpr std::size_t kVisualDim = 3;
constexpr std::size_t kFusedDim = 4;
constexpr std::size_t kVocab = 8;
constexpr std::size_t kCompositePositions = 24;

model::ModelConfig tiny_model_config() {
  model::ModelConfig c;
  c.clips = kN;
  c.text_dim = kTextDim;
  c.visual_dim = kVisualDim;
  c.fused_dim = kFusedDim;
  c.tan_layers = 2;
  c.tan_kernel = 3;
  c.vocab_size = kVocab;
  return c;
}

map::ClipFeatures rand_clips(Rng& rng) {
  map::ClipFeatures f;
  f.count = kN;
  f.dim = kVisualDim;
  f.values = uniform_values(rng, kN * kVisualDim, -1.0, 1.0);
  return f;
}

std::vector<std::vector<std::size_t>> rand_paragraph(Rng& rng, std::size_t sentences) {
  std::uniform_int_distribution<std::size_t> tok(2, kVocab - 1);
  std::uniform_int_distribution<std::size_t> len(2, 4);
  std::vector<std::vector<std::size_t>> out(sentences);
  for (auto& s : out) {
    s.resize(len(rng));
    for (auto& t : s) t = tok(rng);
  }
  return out;
}

GradCheckCase unary_case(std::string name, Tensor (*op)(Tape&, const Tensor&), double lo,
                         double hi) {
  return {name, [op, lo, hi](std::uint64_t seed) {
            Rng rng(seed);
            Tensor x = rand_param(rng, {3, 4}, lo, hi);
            Tensor r = rand_const(rng, {3, 4});
            return GradCheckInstance{[=](Tape& t) { return project(t, op(t, x), r); },
                                     {{"x", x}}};
          }};
}

// The full objective on a tiny model. Pseudo-labels and their weights are
// detached in training, so they are computed once at the base point and
// held fixed while the program is perturbed.
GradCheckCase composite_case(std::string name, int matched) {
  return {name, [matched](std::uint64_t seed) {
            Rng rng(seed);
            auto model = std::make_shared<model::WstanModel>(tiny_model_config(),
                                                             derive_seed(seed, 1));
            // Fresh initialisation leaves TAN pre-activations so small that
            // some relu input always sits within reach of its kink; widen the
            // embeddings and fusion weights so activations are O(1).
            for (auto& p : model->parameters()) {
              const double gain = p.name == "text.embedding" ? 10.0
                                  : p.name.rfind("fusion.", 0) == 0 ? 4.0
                                                                   : 1.0;
              for (double& v : p.tensor.mutable_values()) v *= gain;
            }
            const auto clips = rand_clips(rng);
            const auto paragraph = rand_paragraph(rng, 2);
            const loss::Thresholds th{0.5, 0.9};
            const loss::LossWeights w;
            std::vector<loss::PseudoLabels> from_maps, from_cb;
            {
              Tape tape;
              const auto maps = model->forward(tape, clips, paragraph, true);
              from_maps = loss::make_targets(maps.maps, model->mask(), th);
              from_cb = loss::make_targets(maps.cb_maps, model->mask(), th);
            }
            GradCheckInstance inst;
            inst.program = [=](Tape& t) {
              const auto maps = model->forward(t, clips, paragraph, true);
              loss::LossComponents parts;
              const auto score = model::matching_score(t, maps.maps, model->mask());
              parts.mil = loss::mil_loss(t, score.value, matched);
              if (matched) {
                parts.sd = loss::paragraph_loss(t, maps.maps, from_maps, model->mask());
                parts.cb = loss::paragraph_loss(t, maps.cb_maps, from_maps, model->mask());
                parts.cb_sd = loss::paragraph_loss(t, maps.cb_maps, from_cb, model->mask());
              }
              return loss::total_loss(t, parts, w, matched);
            };
            inst.inputs = model->parameters();
            inst.max_positions = kCompositePositions;
            return inst;
          }};
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

const std::vector<std::string>& registered_ops() {
  static const std::vector<std::string> ops = {
      "affine",  "linear",     "hadamard",   "add",           "scale",
      "sum",     "sigmoid",    "tanh",       "relu",          "slice",
      "concat",  "stack",      "reshape",    "repeat",        "gather_row",
      "apply_mask", "conv2d_masked", "max_reduce", "binary_cross_entropy",
      "build_map_stackconv"};
  return ops;
}

std::vector<GradCheckCase> default_gradcheck_cases() {
  std::vector<GradCheckCase> cases;
  const GridMask tri4 = GridMask::upper_triangle(4);

  cases.push_back({"affine", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {3, 4}), w = rand_param(rng, {5, 4}),
                            b = rand_param(rng, {5}), r = rand_const(rng, {3, 5});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::affine(t, x, w, b), r); },
                         {{"x", x}, {"w", w}, {"b", b}}};
                   }});
  cases.push_back({"linear", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {2, 2, 3}), w = rand_param(rng, {4, 3}),
                            r = rand_const(rng, {2, 2, 4});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::linear(t, x, w), r); },
                         {{"x", x}, {"w", w}}};
                   }});
  cases.push_back({"hadamard", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {3, 3}), b = rand_param(rng, {3, 3}),
                            r = rand_const(rng, {3, 3});
                     // a * a also checks accumulation when both operands alias.
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return ad::add(t, project(t, ad::hadamard(t, a, b), r),
                                          ad::sum(t, ad::hadamard(t, a, a)));
                         },
                         {{"a", a}, {"b", b}}};
                   }});
  cases.push_back({"add", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {5}), b = rand_param(rng, {5}),
                            r = rand_const(rng, {5});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::add(t, a, b), r); },
                         {{"a", a}, {"b", b}}};
                   }});
  cases.push_back({"scale", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {4}), r = rand_const(rng, {4});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::scale(t, x, -1.75), r); },
                         {{"x", x}}};
                   }});
  cases.push_back({"sum", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {2, 3});
                     return GradCheckInstance{[=](Tape& t) { return ad::sum(t, x); },
                                              {{"x", x}}};
                   }});
  cases.push_back(unary_case("sigmoid", &ad::sigmoid, -4.0, 4.0));
  cases.push_back(unary_case("tanh", &ad::tanh, -3.0, 3.0));
  cases.push_back(unary_case("relu", &ad::relu, -1.0, 1.0));
  cases.push_back({"slice", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {7}), r = rand_const(rng, {3});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::slice(t, x, 2, 3), r); },
                         {{"x", x}}};
                   }});
  cases.push_back({"concat", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {2}), b = rand_param(rng, {3}),
                            r = rand_const(rng, {7});
                     return GradCheckInstance{[=](Tape& t) {
                                                const Tensor parts[] = {a, b, a};
                                                return project(t, ad::concat(t, parts), r);
                                              },
                                              {{"a", a}, {"b", b}}};
                   }});
  cases.push_back({"stack", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {2, 3}), b = rand_param(rng, {2, 3}),
                            r = rand_const(rng, {2, 2, 3});
                     return GradCheckInstance{[=](Tape& t) {
                                                const Tensor parts[] = {a, b};
                                                return project(t, ad::stack(t, parts), r);
                                              },
                                              {{"a", a}, {"b", b}}};
                   }});
  cases.push_back({"reshape", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {6}), r = rand_const(rng, {2, 3});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::reshape(t, x, {2, 3}), r); },
                         {{"x", x}}};
                   }});
  cases.push_back({"repeat", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor v = rand_param(rng, {3}), r = rand_const(rng, {2, 2, 3});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::repeat(t, v, {2, 2}), r); },
                         {{"v", v}}};
                   }});
  cases.push_back({"gather_row", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor table = rand_param(rng, {4, 3}), r = rand_const(rng, {3});
                     return GradCheckInstance{[=](Tape& t) {
                                                return ad::add(
                                                    t, project(t, ad::gather_row(t, table, 2), r),
                                                    project(t, ad::gather_row(t, table, 2), r));
                                              },
                                              {{"table", table}}};
                   }});
  cases.push_back({"apply_mask", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor m = rand_param(rng, {4, 4, 2}), r = rand_const(rng, {4, 4, 2});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, ad::apply_mask(t, m, tri4), r); },
                         {{"map", m}}};
                   }});
  cases.push_back({"conv2d_masked", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor m = rand_param(rng, {4, 4, 2}), k = rand_param(rng, {3, 3, 2, 3}),
                            r = rand_const(rng, {4, 4, 3});
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return project(t, ad::conv2d_masked(t, m, k, tri4), r);
                         },
                         {{"map", m}, {"kernel", k}}};
                   }});
  cases.push_back({"max_reduce", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {4, 4});
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return ad::scale(t, ad::max_reduce(t, x, tri4.valid).value, 2.0);
                         },
                         {{"x", x}}};
                   }});
  cases.push_back({"binary_cross_entropy", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor p = rand_param(rng, {4, 4}, 0.05, 0.95);
                     const auto y = uniform_values(rng, 16, 0.0, 1.0);
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return ad::binary_cross_entropy(t, p, y, tri4.valid, 0.3);
                         },
                         {{"p", p}}};
                   }});
  cases.push_back({"build_map_stackconv", [](std::uint64_t seed) {
                     Rng rng(seed);
                     map::ClipFeatures clips = rand_clips(rng);
                     auto params = map::StackConvParams::averaging(kVisualDim, 0.3, seed,
                                                                   ad::Activation::kRelu);
                     params.bias = rand_param(rng, {kVisualDim}, -0.2, 0.2);
                     Tensor r = rand_const(rng, {kN, kN, kVisualDim});
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return project(t, map::build_map_stackconv(t, clips, params), r);
                         },
                         {{"kernel", params.kernel}, {"bias", params.bias}}};
                   }});

  cases.push_back({"lstm_encoder", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto enc = std::make_shared<text::TextEncoder>(
                         text::EncoderConfig{kVocab, kTextDim, 2}, derive_seed(seed, 1));
                     const auto tokens = rand_paragraph(rng, 1).front();
                     Tensor r = rand_const(rng, {kTextDim});
                     GradCheckInstance inst{
                         [=](Tape& t) { return project(t, enc->encode(t, tokens), r); },
                         enc->parameters()};
                     return inst;
                   }});
  cases.push_back({"fuse", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor s = rand_param(rng, {kTextDim}), m = rand_param(rng, {4, 4, kVisualDim});
                     model::FusionParams p{rand_param(rng, {kFusedDim, kTextDim}),
                                           rand_param(rng, {kFusedDim, kVisualDim})};
                     Tensor r = rand_const(rng, {4, 4, kFusedDim});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, model::fuse(t, s, m, p, tri4), r); },
                         {{"sentence", s},
                          {"moment_map", m},
                          {"w_sentence", p.sentence_proj},
                          {"w_moment", p.moment_proj}}};
                   }});
  cases.push_back({"tan_forward", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor x = rand_param(rng, {4, 4, kFusedDim});
                     model::TanParams p;
                     p.kernels = {rand_param(rng, {3, 3, kFusedDim, kFusedDim}, -0.5, 0.5),
                                  rand_param(rng, {3, 3, kFusedDim, kFusedDim}, -0.5, 0.5)};
                     Tensor r = rand_const(rng, {4, 4, kFusedDim});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, model::tan_forward(t, x, p, tri4), r); },
                         {{"fused", x}, {"conv0", p.kernels[0]}, {"conv1", p.kernels[1]}}};
                   }});
  cases.push_back({"score_head", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor c = rand_param(rng, {4, 4, kFusedDim});
                     model::HeadParams h{rand_param(rng, {1, kFusedDim}), rand_param(rng, {1})};
                     Tensor r = rand_const(rng, {4, 4});
                     return GradCheckInstance{
                         [=](Tape& t) { return project(t, model::score_head(t, c, h, tri4), r); },
                         {{"context", c}, {"weight", h.weight}, {"bias", h.bias}}};
                   }});
  cases.push_back({"matching_score", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {4, 4}, 0.0, 1.0),
                            b = rand_param(rng, {4, 4}, 0.0, 1.0);
                     return GradCheckInstance{[=](Tape& t) {
                                                const Tensor maps[] = {a, b};
                                                return model::matching_score(t, maps, tri4).value;
                                              },
                                              {{"map0", a}, {"map1", b}}};
                   }});
  cases.push_back({"mil_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor p = rand_param(rng, {1}, 0.05, 0.95);
                     const int y = static_cast<int>(rng() & 1u);
                     return GradCheckInstance{[=](Tape& t) { return loss::mil_loss(t, p, y); },
                                              {{"P", p}}};
                   }});
  cases.push_back({"soft_ce_loss", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor p = rand_param(rng, {4, 4}, 0.05, 0.95);
                     const auto labels = uniform_values(rng, 16, 0.0, 1.0);
                     const double w = uniform_values(rng, 1, 0.1, 1.0)[0];
                     return GradCheckInstance{
                         [=](Tape& t) { return loss::soft_ce_loss(t, p, labels, w, tri4); },
                         {{"map", p}}};
                   }});
  cases.push_back({"paragraph_loss", [tri4](std::uint64_t seed) {
                     Rng rng(seed);
                     Tensor a = rand_param(rng, {4, 4}, 0.05, 0.95),
                            b = rand_param(rng, {4, 4}, 0.05, 0.95);
                     std::vector<loss::PseudoLabels> targets;
                     {
                       const Tensor src[] = {rand_const(rng, {4, 4}, 0.0, 1.0),
                                             rand_const(rng, {4, 4}, 0.0, 1.0)};
                       targets = loss::make_targets(src, tri4, loss::Thresholds{0.3, 0.8});
                     }
                     return GradCheckInstance{[=](Tape& t) {
                                                const Tensor maps[] = {a, b};
                                                return loss::paragraph_loss(t, maps, targets, tri4);
                                              },
                                              {{"map0", a}, {"map1", b}}};
                   }});
  cases.push_back({"total_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     loss::LossComponents parts{rand_param(rng, {1}), rand_param(rng, {1}),
                                                rand_param(rng, {1}), rand_param(rng, {1})};
                     return GradCheckInstance{
                         [=](Tape& t) {
                           return loss::total_loss(t, parts, loss::LossWeights{}, 1);
                         },
                         {{"mil", parts.mil}, {"cb", parts.cb}, {"sd", parts.sd},
                          {"cb_sd", parts.cb_sd}}};
                   }});
  cases.push_back(composite_case("objective_matched", 1));
  cases.push_back(composite_case("objective_unmatched", 0));
  return cases;
}

GradCheckCase wrong_gradient_case() {
  return {"wrong_square", [](std::uint64_t seed) {
            Rng rng(seed);
            Tensor x = rand_param(rng, {3});
            return GradCheckInstance{
                [=](Tape& t) {
                  std::vector<double> y(x.size());
                  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.values()[i] * x.values()[i];
                  Tensor sq = t.emit("wrong_square", x.shape(), std::move(y), true,
                                     [x](std::span<const double> g) {
                                       auto gx = Tensor(x).mutable_grad();
                                       // d(x^2)/dx is 2x; this reports x.
                                       for (std::size_t i = 0; i < g.size(); ++i)
                                         gx[i] += g[i] * x.values()[i];
                                     });
                  return ad::sum(t, sq);
                },
                {{"x", x}}};
          }};
}

bool GradCheckReport::passed() const {
  return uncovered_ops.empty() &&
         std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.passed; });
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  char buf[256];
  for (const auto& c : cases) {
    if (!c.error.empty()) {
      os << "FAIL " << c.name << ": " << c.error << '\n';
      continue;
    }
    std::snprintf(buf, sizeof buf,
                  "%s %-22s max_rel_err=%.3e points=%zu partials=%zu redraws=%zu", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.max_rel_error, c.points, c.partials, c.redraws);
    os << buf;
    if (!c.passed) {
      std::snprintf(buf, sizeof buf, " worst=%s[%zu] analytic=%.6g numeric=%.6g",
                    c.worst_input.c_str(), c.worst_index, c.analytic, c.numeric);
      os << buf;
    }
    os << '\n';
  }
  for (const auto& op : uncovered_ops) os << "FAIL op not covered by any case: " << op << '\n';
  std::snprintf(buf, sizeof buf, "%s: %zu cases in %.1fs\n", passed() ? "PASS" : "FAIL",
                cases.size(), seconds);
  os << buf;
  return os.str();
}

GradCheckReport run_gradcheck_suite(const std::vector<GradCheckCase>& cases,
                                    const GradCheckOptions& options) {
  const double start = now_seconds();
  GradCheckReport report;
  std::set<std::string> names;
  std::set<std::string> seen_ops;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& gc = cases[ci];
    if (!names.insert(gc.name).second)
      throw ConfigError("gradcheck: duplicate case name '" + gc.name + "'");
    GradCheckCaseReport rep;
    rep.name = gc.name;
    try {
      const std::uint64_t case_seed = derive_seed(options.seed, ci);
      std::uint64_t draw = 0;
      for (std::size_t p = 0; p < options.points; ++p) {
        GradCheckInstance inst;
        for (std::size_t tries = 0;; ++tries) {
          inst = gc.make(derive_seed(case_seed, draw++));
          if (ad::kink_margin(inst.program) >= options.min_kink_margin) break;
          if (tries >= options.max_redraws)
            throw NumericError("no point found away from kinks");
          ++rep.redraws;
        }
        if (p == 0) {
          Tape tape;
          inst.program(tape);
          for (auto& op : tape.op_names()) seen_ops.insert(op);
        }
        std::vector<std::vector<std::size_t>> positions(inst.inputs.size());
        Rng pick(derive_seed(case_seed, 1'000'000 + p));
        for (std::size_t k = 0; k < inst.inputs.size(); ++k) {
          auto& pos = positions[k];
          pos.resize(inst.inputs[k].tensor.size());
          std::iota(pos.begin(), pos.end(), std::size_t{0});
          if (inst.max_positions && pos.size() > inst.max_positions) {
            std::shuffle(pos.begin(), pos.end(), pick);
            pos.resize(inst.max_positions);
            std::sort(pos.begin(), pos.end());
          }
        }
        const auto r = ad::grad_check_sampled(inst.program, inst.inputs, positions, options.h);
        rep.partials += r.checked;
        if (p == 0 || r.max_rel_error > rep.max_rel_error) {
          rep.max_rel_error = r.max_rel_error;
          rep.worst_input = r.worst_input;
          rep.worst_index = r.worst_index;
          rep.analytic = r.analytic;
          rep.numeric = r.numeric;
        }
        ++rep.points;
      }
      rep.passed = rep.max_rel_error <= options.tolerance;
    } catch (const std::exception& e) {
      rep.passed = false;
      rep.error = e.what();
    }
    report.cases.push_back(std::move(rep));
  }
  // Coverage is only demanded when the default registry is being run.
  const bool covers_library =
      std::any_of(cases.begin(), cases.end(), [](const auto& c) { return c.name == "affine"; });
  if (covers_library)
    for (const auto& op : registered_ops())
      if (!seen_ops.count(op)) report.uncovered_ops.push_back(op);
  report.seconds = now_seconds() - start;
  return report;
}

}  // namespace wstan::pipeline
