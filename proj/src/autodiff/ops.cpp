#include "wstan/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wstan/error.hpp"
#include "wstan/kernels/conv2d.hpp"

namespace wstan::ad {
namespace {

// Gradient buffer of `t`, or nullptr when `t` does not take gradients.
double* grad_of(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  return t.node().ensure_grad().data();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <typename Fwd, typename Deriv>
Tensor elementwise(Tape& tape, const char* op, const Tensor& x, Fwd fwd,
                   Deriv deriv) {
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  // Derivatives are taken from the input and output values at emit time.
  std::vector<double> d(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) d[i] = deriv(xv[i], out[i]);
  return tape.emit(op, x.shape(), std::move(out), x.requires_grad(),
                   [x, d = std::move(d)](std::span<const double> g) {
                     double* gx = grad_of(x);
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d[i];
                   });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.shape().back() != w.dim(1) ||
      (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(0))))
    throw DimensionError("affine: input " + shape_string(x.shape()) +
                         " incompatible with weight " + shape_string(w.shape()) +
                         (b.defined() ? " and bias " + shape_string(b.shape())
                                      : std::string()));
  const std::size_t in = w.dim(1);
  const std::size_t out_dim = w.dim(0);
  const std::size_t rows = x.size() / in;
  Shape shape = x.shape();
  shape.back() = out_dim;

  std::vector<double> y(rows * out_dim);
  const auto xv = x.values();
  const auto wv = w.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wv.data() + o * in;
      double acc = b.defined() ? b.values()[o] : 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += xr[c] * wr[c];
      y[r * out_dim + o] = acc;
    }
  }
  const bool needs = x.requires_grad() || w.requires_grad() ||
                     (b.defined() && b.requires_grad());
  return tape.emit(b.defined() ? "affine" : "linear", std::move(shape),
                   std::move(y), needs,
                   [x, w, b, rows, in, out_dim](std::span<const double> g) {
    double* gx = grad_of(x);
    double* gw = grad_of(w);
    double* gb = b.defined() ? grad_of(b) : nullptr;
    const auto xv = x.values();
    const auto wv = w.values();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.data() + r * out_dim;
      const double* xr = xv.data() + r * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double go = gr[o];
        if (go == 0.0) continue;
        if (gx) {
          const double* wr = wv.data() + o * in;
          double* gxr = gx + r * in;
          for (std::size_t c = 0; c < in; ++c) gxr[c] += go * wr[c];
        }
        if (gw) {
          double* gwr = gw + o * in;
          for (std::size_t c = 0; c < in; ++c) gwr[c] += go * xr[c];
        }
        if (gb) gb[o] += go;
      }
    }
  });
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w) {
  return affine(tape, x, w, Tensor());
}

Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  std::vector<double> y(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return tape.emit("hadamard", a.shape(), std::move(y),
                   a.requires_grad() || b.requires_grad(),
                   [a, b](std::span<const double> g) {
    if (double* ga = grad_of(a)) {
      const auto bv = b.values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (double* gb = grad_of(b)) {
      const auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return tape.emit("add", a.shape(), std::move(y),
                   a.requires_grad() || b.requires_grad(),
                   [a, b](std::span<const double> g) {
    if (double* ga = grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  std::vector<double> y(x.values().begin(), x.values().end());
  for (auto& v : y) v *= factor;
  return tape.emit("scale", x.shape(), std::move(y), x.requires_grad(),
                   [x, factor](std::span<const double> g) {
    double* gx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return tape.emit("sum", {1}, {total}, x.requires_grad(),
                   [x](std::span<const double> g) {
    double* gx = grad_of(x);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[0];
  });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return elementwise(tape, "sigmoid", x, stable_sigmoid,
                     [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return elementwise(tape, "tanh", x, [](double v) { return std::tanh(v); },
                     [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  double margin = std::numeric_limits<double>::infinity();
  for (double v : x.values())
    if (v != 0.0) margin = std::min(margin, std::abs(v));
  tape.note_kink_margin(margin);
  return elementwise(tape, "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                     [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor activate(Tape& tape, const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return relu(tape, x);
    case Activation::kTanh: return tanh(tape, x);
    case Activation::kSigmoid: return sigmoid(tape, x);
  }
  return x;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t offset,
             std::size_t length) {
  if (x.rank() != 1 || length == 0 || offset + length > x.size())
    throw DimensionError("slice: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") out of " +
                         shape_string(x.shape()));
  const auto xv = x.values();
  std::vector<double> y(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                        xv.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return tape.emit("slice", {length}, std::move(y), x.requires_grad(),
                   [x, offset](std::span<const double> g) {
    double* gx = grad_of(x) + offset;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> y;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.rank() != 1)
      throw DimensionError("concat: expects rank-1 inputs, got " +
                           shape_string(p.shape()));
    y.insert(y.end(), p.values().begin(), p.values().end());
    needs = needs || p.requires_grad();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  const std::size_t total = y.size();
  return tape.emit("concat", {total}, std::move(y), needs,
                   [inputs = std::move(inputs)](std::span<const double> g) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      if (double* gp = grad_of(p))
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[off + i];
      off += p.size();
    }
  });
}

Tensor stack(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  std::vector<double> y;
  bool needs = false;
  for (const auto& p : parts) {
    require_same_shape("stack", parts.front(), p);
    y.insert(y.end(), p.values().begin(), p.values().end());
    needs = needs || p.requires_grad();
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), parts.front().shape().begin(),
               parts.front().shape().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return tape.emit("stack", std::move(shape), std::move(y), needs,
                   [inputs = std::move(inputs)](std::span<const double> g) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      if (double* gp = grad_of(p))
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[off + i];
      off += p.size();
    }
  });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " +
                         shape_string(shape));
  std::vector<double> y(x.values().begin(), x.values().end());
  return tape.emit("reshape", std::move(shape), std::move(y), x.requires_grad(),
                   [x](std::span<const double> g) {
    double* gx = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor repeat(Tape& tape, const Tensor& v, const Shape& prefix) {
  if (v.rank() != 1)
    throw DimensionError("repeat: expects a rank-1 input, got " +
                         shape_string(v.shape()));
  const std::size_t copies = numel(prefix);
  const std::size_t d = v.size();
  std::vector<double> y(copies * d);
  for (std::size_t c = 0; c < copies; ++c)
    std::copy(v.values().begin(), v.values().end(), y.begin() + static_cast<std::ptrdiff_t>(c * d));
  Shape shape = prefix;
  shape.push_back(d);
  return tape.emit("repeat", std::move(shape), std::move(y), v.requires_grad(),
                   [v, copies, d](std::span<const double> g) {
    double* gv = grad_of(v);
    for (std::size_t c = 0; c < copies; ++c)
      for (std::size_t i = 0; i < d; ++i) gv[i] += g[c * d + i];
  });
}

Tensor gather_row(Tape& tape, const Tensor& table, std::size_t index) {
  if (table.rank() != 2 || index >= table.dim(0))
    throw DimensionError("gather_row: row " + std::to_string(index) +
                         " of " + shape_string(table.shape()));
  const std::size_t cols = table.dim(1);
  const auto tv = table.values();
  std::vector<double> y(tv.begin() + static_cast<std::ptrdiff_t>(index * cols),
                        tv.begin() + static_cast<std::ptrdiff_t>((index + 1) * cols));
  return tape.emit("gather_row", {cols}, std::move(y), table.requires_grad(),
                   [table, index, cols](std::span<const double> g) {
    double* gt = grad_of(table) + index * cols;
    for (std::size_t i = 0; i < cols; ++i) gt[i] += g[i];
  });
}

Tensor apply_mask(Tape& tape, const Tensor& map, const GridMask& mask) {
  if (map.rank() < 2 || map.dim(0) != mask.n || map.dim(1) != mask.n)
    throw DimensionError("apply_mask: map " + shape_string(map.shape()) +
                         " vs mask of size " + std::to_string(mask.n));
  const std::size_t per = map.size() / (mask.n * mask.n);
  std::vector<double> y(map.values().begin(), map.values().end());
  for (std::size_t p = 0; p < mask.n * mask.n; ++p)
    if (!mask.valid[p]) std::fill_n(y.begin() + static_cast<std::ptrdiff_t>(p * per), per, 0.0);
  return tape.emit("apply_mask", map.shape(), std::move(y), map.requires_grad(),
                   [map, mask, per](std::span<const double> g) {
    double* gm = grad_of(map);
    for (std::size_t p = 0; p < mask.n * mask.n; ++p) {
      if (!mask.valid[p]) continue;
      for (std::size_t c = 0; c < per; ++c) gm[p * per + c] += g[p * per + c];
    }
  });
}

Tensor conv2d_masked(Tape& tape, const Tensor& map, const Tensor& kernel,
                     const GridMask& mask) {
  if (kernel.rank() != 4 || kernel.dim(0) != kernel.dim(1))
    throw DimensionError("conv2d_masked: kernel must be [k, k, in, out], got " +
                         shape_string(kernel.shape()));
  if (kernel.dim(0) % 2 == 0)
    throw ConfigError("conv2d_masked: kernel size " +
                      std::to_string(kernel.dim(0)) + " must be odd");
  if (map.rank() != 3 || map.dim(0) != map.dim(1) || map.dim(0) != mask.n ||
      map.dim(2) != kernel.dim(2))
    throw DimensionError("conv2d_masked: map " + shape_string(map.shape()) +
                         " incompatible with kernel " +
                         shape_string(kernel.shape()));
  const kernels::ConvGeometry geom{map.dim(0), kernel.dim(0), kernel.dim(2),
                                   kernel.dim(3)};
  std::vector<double> y(geom.out_size());
  kernels::conv2d_forward_omp(geom, map.values(), kernel.values(), mask.valid, y);
  return tape.emit("conv2d_masked", {geom.n, geom.n, geom.out_ch}, std::move(y),
                   map.requires_grad() || kernel.requires_grad(),
                   [map, kernel, mask, geom](std::span<const double> g) {
    if (double* gm = grad_of(map))
      kernels::conv2d_backward_input_omp(geom, g, kernel.values(), mask.valid,
                                         {gm, geom.map_size()});
    if (double* gk = grad_of(kernel))
      kernels::conv2d_backward_kernel_omp(geom, map.values(), g, mask.valid,
                                          {gk, geom.kernel_size()});
  });
}

MaxResult max_reduce(Tape& tape, const Tensor& x,
                     std::span<const std::uint8_t> valid) {
  if (valid.size() != x.size())
    throw DimensionError("max_reduce: mask of " + std::to_string(valid.size()) +
                         " entries for tensor " + shape_string(x.shape()));
  const auto xv = x.values();
  std::size_t arg = x.size();
  for (std::size_t i = 0; i < xv.size(); ++i)
    if (valid[i] && (arg == x.size() || xv[i] > xv[arg])) arg = i;
  if (arg == x.size())
    throw PreconditionError("max_reduce: no valid position");
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xv.size(); ++i)
    if (valid[i] && i != arg) runner_up = std::max(runner_up, xv[i]);
  tape.note_kink_margin(xv[arg] - runner_up);

  Tensor value = tape.emit("max_reduce", {1}, {xv[arg]}, x.requires_grad(),
                           [x, arg](std::span<const double> g) {
    grad_of(x)[arg] += g[0];
  });
  return MaxResult{std::move(value), arg};
}

Tensor binary_cross_entropy(Tape& tape, const Tensor& p,
                            std::span<const double> targets,
                            std::span<const std::uint8_t> valid,
                            double factor) {
  if (targets.size() != p.size() || (!valid.empty() && valid.size() != p.size()))
    throw DimensionError("binary_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for predictions " + shape_string(p.shape()));
  const auto pv = p.values();
  const double lo = kProbEpsilon;
  const double hi = 1.0 - kProbEpsilon;
  double total = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  std::vector<double> d(p.size(), 0.0);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double y = targets[i];
    const double q = std::clamp(pv[i], lo, hi);
    margin = std::min(margin, std::abs(std::min(pv[i] - lo, hi - pv[i])));
    total -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    // Zero slope where the clamp is active.
    if (pv[i] > lo && pv[i] < hi) d[i] = factor * ((1.0 - y) / (1.0 - q) - y / q);
  }
  tape.note_kink_margin(margin);
  return tape.emit("binary_cross_entropy", {1}, {factor * total},
                   p.requires_grad(),
                   [p, d = std::move(d)](std::span<const double> g) {
    double* gp = grad_of(p);
    for (std::size_t i = 0; i < d.size(); ++i) gp[i] += g[0] * d[i];
  });
}

}  // namespace wstan::ad
