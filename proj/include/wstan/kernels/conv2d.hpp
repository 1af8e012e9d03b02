#pragma once

// Masked same-size 2D convolution kernels over moment maps.
//
// Every kernel exists twice: a serial reference and an OpenMP version. Both
// produce bit-identical results because each output element is accumulated
// by exactly one thread in the same order as the serial loop.
//
// Layouts (row-major):
//   map      [n, n, in_ch]
//   kernel   [k, k, in_ch, out_ch]
//   output   [n, n, out_ch]
//   mask     [n, n], nonzero = valid

#include <cstddef>
#include <cstdint>
#include <span>

namespace wstan::kernels {

struct ConvGeometry {
  std::size_t n = 0;
  std::size_t k = 1;
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;

  std::size_t radius() const { return k / 2; }
  std::size_t map_size() const { return n * n * in_ch; }
  std::size_t out_size() const { return n * n * out_ch; }
  std::size_t kernel_size() const { return k * k * in_ch * out_ch; }
};

/// out = mask(conv(mask(in))). `out` is overwritten.
void conv2d_forward_serial(const ConvGeometry& g, std::span<const double> in,
                           std::span<const double> kernel,
                           std::span<const std::uint8_t> mask,
                           std::span<double> out);
void conv2d_forward_omp(const ConvGeometry& g, std::span<const double> in,
                        std::span<const double> kernel,
                        std::span<const std::uint8_t> mask,
                        std::span<double> out);

/// grad_in += d(out)/d(in)^T grad_out. `grad_in` at masked positions stays
/// untouched.
void conv2d_backward_input_serial(const ConvGeometry& g,
                                  std::span<const double> grad_out,
                                  std::span<const double> kernel,
                                  std::span<const std::uint8_t> mask,
                                  std::span<double> grad_in);
void conv2d_backward_input_omp(const ConvGeometry& g,
                               std::span<const double> grad_out,
                               std::span<const double> kernel,
                               std::span<const std::uint8_t> mask,
                               std::span<double> grad_in);

/// grad_kernel += d(out)/d(kernel)^T grad_out.
void conv2d_backward_kernel_serial(const ConvGeometry& g,
                                   std::span<const double> in,
                                   std::span<const double> grad_out,
                                   std::span<const std::uint8_t> mask,
                                   std::span<double> grad_kernel);
void conv2d_backward_kernel_omp(const ConvGeometry& g,
                                std::span<const double> in,
                                std::span<const double> grad_out,
                                std::span<const std::uint8_t> mask,
                                std::span<double> grad_kernel);

/// Below this many multiply-adds the OpenMP entry points run serially.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace wstan::kernels
