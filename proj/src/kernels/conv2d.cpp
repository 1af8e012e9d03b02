#include "wstan/kernels/conv2d.hpp"

#include <algorithm>
#include <vector>

namespace wstan::kernels {
namespace {

// Offsets are computed in signed arithmetic; out-of-range taps are skipped.
inline bool in_range(std::ptrdiff_t v, std::size_t n) {
  return v >= 0 && v < static_cast<std::ptrdiff_t>(n);
}

std::size_t forward_work(const ConvGeometry& g) {
  return g.n * g.n * g.k * g.k * g.in_ch * g.out_ch;
}

inline void forward_position(const ConvGeometry& g, std::span<const double> in,
                             std::span<const double> kernel,
                             std::span<const std::uint8_t> mask,
                             std::size_t pos, double* out) {
  const std::size_t n = g.n;
  const std::size_t cin = g.in_ch;
  const std::size_t cout = g.out_ch;
  std::fill(out, out + cout, 0.0);
  if (!mask[pos]) return;
  const auto r = static_cast<std::ptrdiff_t>(g.radius());
  const auto i = static_cast<std::ptrdiff_t>(pos / n);
  const auto j = static_cast<std::ptrdiff_t>(pos % n);
  for (std::size_t a = 0; a < g.k; ++a) {
    const std::ptrdiff_t y = i + static_cast<std::ptrdiff_t>(a) - r;
    if (!in_range(y, n)) continue;
    for (std::size_t b = 0; b < g.k; ++b) {
      const std::ptrdiff_t x = j + static_cast<std::ptrdiff_t>(b) - r;
      if (!in_range(x, n)) continue;
      const std::size_t q = static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x);
      if (!mask[q]) continue;
      const double* in_row = in.data() + q * cin;
      const double* w_tap = kernel.data() + (a * g.k + b) * cin * cout;
      for (std::size_t c = 0; c < cin; ++c) {
        const double v = in_row[c];
        const double* w = w_tap + c * cout;
        for (std::size_t o = 0; o < cout; ++o) out[o] += v * w[o];
      }
    }
  }
}

// kernel [k, k, cin, cout] -> [k, k, cout, cin] so the input-gradient loop
// runs contiguously over input channels.
std::vector<double> transpose_taps(const ConvGeometry& g,
                                   std::span<const double> kernel) {
  std::vector<double> t(kernel.size());
  const std::size_t cin = g.in_ch;
  const std::size_t cout = g.out_ch;
  for (std::size_t tap = 0; tap < g.k * g.k; ++tap) {
    const double* src = kernel.data() + tap * cin * cout;
    double* dst = t.data() + tap * cin * cout;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t o = 0; o < cout; ++o) dst[o * cin + c] = src[c * cout + o];
  }
  return t;
}

inline void backward_input_position(const ConvGeometry& g,
                                    std::span<const double> grad_out,
                                    const std::vector<double>& kernel_t,
                                    std::span<const std::uint8_t> mask,
                                    std::size_t q, double* acc,
                                    double* grad_in) {
  if (!mask[q]) return;
  const std::size_t n = g.n;
  const std::size_t cin = g.in_ch;
  const std::size_t cout = g.out_ch;
  const auto r = static_cast<std::ptrdiff_t>(g.radius());
  const auto y = static_cast<std::ptrdiff_t>(q / n);
  const auto x = static_cast<std::ptrdiff_t>(q % n);
  std::fill(acc, acc + cin, 0.0);
  for (std::size_t a = 0; a < g.k; ++a) {
    const std::ptrdiff_t i = y - static_cast<std::ptrdiff_t>(a) + r;
    if (!in_range(i, n)) continue;
    for (std::size_t b = 0; b < g.k; ++b) {
      const std::ptrdiff_t j = x - static_cast<std::ptrdiff_t>(b) + r;
      if (!in_range(j, n)) continue;
      const std::size_t p = static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j);
      if (!mask[p]) continue;
      const double* go = grad_out.data() + p * cout;
      const double* wt = kernel_t.data() + (a * g.k + b) * cin * cout;
      for (std::size_t o = 0; o < cout; ++o) {
        const double gv = go[o];
        const double* w = wt + o * cin;
        for (std::size_t c = 0; c < cin; ++c) acc[c] += gv * w[c];
      }
    }
  }
  double* dst = grad_in + q * cin;
  for (std::size_t c = 0; c < cin; ++c) dst[c] += acc[c];
}

// One row of the kernel gradient: tap (a, b), input channel c.
inline void backward_kernel_row(const ConvGeometry& g,
                                std::span<const double> in,
                                std::span<const double> grad_out,
                                std::span<const std::uint8_t> mask,
                                std::size_t row, double* grad_kernel) {
  const std::size_t n = g.n;
  const std::size_t cin = g.in_ch;
  const std::size_t cout = g.out_ch;
  const std::size_t tap = row / cin;
  const std::size_t c = row % cin;
  const auto a = static_cast<std::ptrdiff_t>(tap / g.k);
  const auto b = static_cast<std::ptrdiff_t>(tap % g.k);
  const auto r = static_cast<std::ptrdiff_t>(g.radius());
  double* gk = grad_kernel + row * cout;
  for (std::size_t p = 0; p < n * n; ++p) {
    if (!mask[p]) continue;
    const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(p / n) + a - r;
    const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(p % n) + b - r;
    if (!in_range(y, n) || !in_range(x, n)) continue;
    const std::size_t q = static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x);
    if (!mask[q]) continue;
    const double v = in[q * cin + c];
    const double* go = grad_out.data() + p * cout;
    for (std::size_t o = 0; o < cout; ++o) gk[o] += v * go[o];
  }
}

}  // namespace

void conv2d_forward_serial(const ConvGeometry& g, std::span<const double> in,
                           std::span<const double> kernel,
                           std::span<const std::uint8_t> mask,
                           std::span<double> out) {
  for (std::size_t p = 0; p < g.n * g.n; ++p)
    forward_position(g, in, kernel, mask, p, out.data() + p * g.out_ch);
}

void conv2d_forward_omp(const ConvGeometry& g, std::span<const double> in,
                        std::span<const double> kernel,
                        std::span<const std::uint8_t> mask,
                        std::span<double> out) {
  const auto positions = static_cast<std::ptrdiff_t>(g.n * g.n);
  const bool parallel = forward_work(g) >= kParallelThreshold;
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::ptrdiff_t p = 0; p < positions; ++p) {
    const auto pos = static_cast<std::size_t>(p);
    forward_position(g, in, kernel, mask, pos, out.data() + pos * g.out_ch);
  }
}

void conv2d_backward_input_serial(const ConvGeometry& g,
                                  std::span<const double> grad_out,
                                  std::span<const double> kernel,
                                  std::span<const std::uint8_t> mask,
                                  std::span<double> grad_in) {
  const auto kernel_t = transpose_taps(g, kernel);
  std::vector<double> acc(g.in_ch);
  for (std::size_t q = 0; q < g.n * g.n; ++q)
    backward_input_position(g, grad_out, kernel_t, mask, q, acc.data(),
                            grad_in.data());
}

void conv2d_backward_input_omp(const ConvGeometry& g,
                               std::span<const double> grad_out,
                               std::span<const double> kernel,
                               std::span<const std::uint8_t> mask,
                               std::span<double> grad_in) {
  const auto kernel_t = transpose_taps(g, kernel);
  const auto positions = static_cast<std::ptrdiff_t>(g.n * g.n);
  const bool parallel = forward_work(g) >= kParallelThreshold;
#pragma omp parallel if (parallel)
  {
    std::vector<double> acc(g.in_ch);
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t q = 0; q < positions; ++q)
      backward_input_position(g, grad_out, kernel_t, mask,
                              static_cast<std::size_t>(q), acc.data(),
                              grad_in.data());
  }
}

void conv2d_backward_kernel_serial(const ConvGeometry& g,
                                   std::span<const double> in,
                                   std::span<const double> grad_out,
                                   std::span<const std::uint8_t> mask,
                                   std::span<double> grad_kernel) {
  const std::size_t rows = g.k * g.k * g.in_ch;
  for (std::size_t row = 0; row < rows; ++row)
    backward_kernel_row(g, in, grad_out, mask, row, grad_kernel.data());
}

void conv2d_backward_kernel_omp(const ConvGeometry& g,
                                std::span<const double> in,
                                std::span<const double> grad_out,
                                std::span<const std::uint8_t> mask,
                                std::span<double> grad_kernel) {
  const auto rows = static_cast<std::ptrdiff_t>(g.k * g.k * g.in_ch);
  const bool parallel = forward_work(g) >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t row = 0; row < rows; ++row)
    backward_kernel_row(g, in, grad_out, mask, static_cast<std::size_t>(row),
                        grad_kernel.data());
}

}  // namespace wstan::kernels
