#include "wstan/map/moment_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wstan/error.hpp"
#include "wstan/random.hpp"

namespace wstan::map {
namespace {

double act_value(ad::Activation act, double v) {
  switch (act) {
    case ad::Activation::kIdentity: return v;
    case ad::Activation::kRelu: return v > 0.0 ? v : 0.0;
    case ad::Activation::kTanh: return std::tanh(v);
    case ad::Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

// Derivative expressed through the pre-activation and the output.
double act_slope(ad::Activation act, double pre, double out) {
  switch (act) {
    case ad::Activation::kIdentity: return 1.0;
    case ad::Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case ad::Activation::kTanh: return 1.0 - out * out;
    case ad::Activation::kSigmoid: return out * (1.0 - out);
  }
  return 1.0;
}

}  // namespace

const char* backend_name(MapBackend backend) {
  return backend == MapBackend::kPool ? "pool" : "stackconv";
}

MapBackend parse_backend(std::string_view name) {
  if (name == "pool") return MapBackend::kPool;
  if (name == "stackconv") return MapBackend::kStackConv;
  throw ConfigError("unknown map backend '" + std::string(name) + "'");
}

ClipFeatures pool_clips(const FeatureMatrix& frames, std::size_t clips) {
  if (clips == 0) throw ConfigError("pool_clips: clip count must be positive");
  if (frames.count < clips)
    throw DataError("pool_clips: " + std::to_string(frames.count) +
                    " frames cannot fill " + std::to_string(clips) + " clips");
  const std::size_t base = frames.count / clips;
  const std::size_t extra = frames.count % clips;
  ClipFeatures out{clips, frames.dim, std::vector<double>(clips * frames.dim)};
  std::size_t frame = 0;
  for (std::size_t c = 0; c < clips; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    double* dst = out.values.data() + c * frames.dim;
    const auto first = frames.row(frame);
    std::copy(first.begin(), first.end(), dst);
    for (std::size_t f = frame + 1; f < frame + len; ++f) {
      const auto src = frames.row(f);
      for (std::size_t k = 0; k < frames.dim; ++k) dst[k] = std::max(dst[k], src[k]);
    }
    frame += len;
  }
  return out;
}

ad::Tensor build_map_pool(const ClipFeatures& clips) {
  const std::size_t n = clips.count;
  const std::size_t d = clips.dim;
  std::vector<double> map(n * n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* diag = map.data() + (i * n + i) * d;
    const auto fi = clips.row(i);
    std::copy(fi.begin(), fi.end(), diag);
    // F_ij = max(F_i,j-1, f_j)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* prev = map.data() + (i * n + j - 1) * d;
      double* cur = map.data() + (i * n + j) * d;
      const auto fj = clips.row(j);
      for (std::size_t k = 0; k < d; ++k) cur[k] = std::max(prev[k], fj[k]);
    }
  }
  return ad::Tensor({n, n, d}, std::move(map));
}

StackConvParams StackConvParams::averaging(std::size_t dim, double noise,
                                           std::uint64_t seed,
                                           ad::Activation activation) {
  Rng rng(derive_seed(seed, 0x5c0c));
  auto w = normal_values(rng, 2 * dim * dim, noise);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < dim; ++c) w[(t * dim + c) * dim + c] += 0.5;
  StackConvParams p;
  p.kernel = ad::Tensor({2, dim, dim}, std::move(w), true);
  p.bias = ad::Tensor::zeros({dim}, true);
  p.activation = activation;
  return p;
}

ad::Tensor build_map_stackconv(ad::Tape& tape, const ClipFeatures& clips,
                               const StackConvParams& params) {
  const std::size_t n = clips.count;
  const std::size_t d = clips.dim;
  if (params.kernel.shape() != ad::Shape{2, d, d} || params.bias.shape() != ad::Shape{d})
    throw DimensionError("stackconv: kernel " + ad::shape_string(params.kernel.shape()) +
                         " / bias " + ad::shape_string(params.bias.shape()) +
                         " do not match clip dim " + std::to_string(d));
  const auto kv = params.kernel.values();
  const auto bv = params.bias.values();
  const ad::Activation act = params.activation;

  std::vector<double> map(n * n * d, 0.0);
  std::vector<double> pre(n * n * d, 0.0);
  auto at = [&](std::vector<double>& m, std::size_t i, std::size_t j) {
    return m.data() + (i * n + j) * d;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = clips.row(i);
    std::copy(fi.begin(), fi.end(), at(map, i, i));
  }
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t off = 1; off < n; ++off) {
    for (std::size_t i = 0; i + off < n; ++i) {
      const std::size_t j = i + off;
      const double* left = at(map, i, j - 1);
      const double* down = at(map, i + 1, j);
      double* p = at(pre, i, j);
      std::copy(bv.begin(), bv.end(), p);
      for (std::size_t c = 0; c < d; ++c) {
        const double* w0 = kv.data() + c * d;
        const double* w1 = kv.data() + (d + c) * d;
        for (std::size_t o = 0; o < d; ++o) p[o] += left[c] * w0[o] + down[c] * w1[o];
      }
      double* out = at(map, i, j);
      for (std::size_t o = 0; o < d; ++o) {
        out[o] = act_value(act, p[o]);
        if (act == ad::Activation::kRelu && p[o] != 0.0)
          margin = std::min(margin, std::abs(p[o]));
      }
    }
  }
  tape.note_kink_margin(margin);

  const bool needs = params.kernel.requires_grad() || params.bias.requires_grad();
  std::vector<double> values = map;
  return tape.emit(
      "build_map_stackconv", {n, n, d}, std::move(values), needs,
      [kernel = params.kernel, bias = params.bias, act, n, d,
       map = std::move(map), pre = std::move(pre)](std::span<const double> g) {
        std::vector<double> gmap(g.begin(), g.end());
        std::vector<double> gpre(d);
        const auto kv = kernel.values();
        double* gk = kernel.requires_grad() ? kernel.node().ensure_grad().data() : nullptr;
        double* gb = bias.requires_grad() ? bias.node().ensure_grad().data() : nullptr;
        for (std::size_t off = n; off-- > 1;) {
          for (std::size_t i = 0; i + off < n; ++i) {
            const std::size_t j = i + off;
            const std::size_t pos = (i * n + j) * d;
            for (std::size_t o = 0; o < d; ++o)
              gpre[o] = gmap[pos + o] * act_slope(act, pre[pos + o], map[pos + o]);
            const std::size_t left = (i * n + j - 1) * d;
            const std::size_t down = ((i + 1) * n + j) * d;
            for (std::size_t c = 0; c < d; ++c) {
              const double* w0 = kv.data() + c * d;
              const double* w1 = kv.data() + (d + c) * d;
              double s0 = 0.0;
              double s1 = 0.0;
              for (std::size_t o = 0; o < d; ++o) {
                s0 += w0[o] * gpre[o];
                s1 += w1[o] * gpre[o];
              }
              gmap[left + c] += s0;
              gmap[down + c] += s1;
              if (gk) {
                double* g0 = gk + c * d;
                double* g1 = gk + (d + c) * d;
                for (std::size_t o = 0; o < d; ++o) {
                  g0[o] += map[left + c] * gpre[o];
                  g1[o] += map[down + c] * gpre[o];
                }
              }
            }
            if (gb)
              for (std::size_t o = 0; o < d; ++o) gb[o] += gpre[o];
          }
        }
      });
}

Span moment_to_span(std::size_t i, std::size_t j, std::size_t clips,
                    double duration) {
  if (i > j || j >= clips)
    throw PreconditionError("invalid moment (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") for " +
                            std::to_string(clips) + " clips");
  const auto n = static_cast<double>(clips);
  return Span{static_cast<double>(i) * duration / n,
              static_cast<double>(j + 1) * duration / n};
}

}  // namespace wstan::map
