#pragma once

#include <span>

// Data-parallel inner loops. Each kernel has an OpenMP version used by the
// pipeline and a plain serial version in `reference` that the tests compare
// against. The parallel versions partition work so that every output element
// is written by exactly one thread with a fixed summation order, so results
// do not depend on the thread count.
namespace selfseg::kernels {

struct Planes {
  int channels;
  int height;
  int width;

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const noexcept { return plane() * channels; }
};

// Clamped-window mean and median over a (2r+1)^2 window, edge replicated.
void window_stats(std::span<const double> image, int width, int height, int radius, std::span<double> mean,
                  std::span<double> median);

// Same-size convolution with zero padding, kernel k x k (k odd).
// weights: [out][in][k][k], bias: [out], in: [in][h][w], out: [out][h][w].
void conv2d_forward(std::span<const double> in, Planes in_shape, std::span<const double> weights,
                    std::span<const double> bias, int out_channels, int k, std::span<double> out);

// Accumulates dL/din (+=) from dL/dout.
void conv2d_backward_input(std::span<const double> grad_out, Planes in_shape, std::span<const double> weights,
                           int out_channels, int k, std::span<double> grad_in);

// Accumulates dL/dweights and dL/dbias (+=).
void conv2d_backward_params(std::span<const double> in, Planes in_shape, std::span<const double> grad_out,
                            int out_channels, int k, std::span<double> grad_weights, std::span<double> grad_bias);

namespace reference {

void window_stats(std::span<const double> image, int width, int height, int radius, std::span<double> mean,
                  std::span<double> median);
void conv2d_forward(std::span<const double> in, Planes in_shape, std::span<const double> weights,
                    std::span<const double> bias, int out_channels, int k, std::span<double> out);
void conv2d_backward_input(std::span<const double> grad_out, Planes in_shape, std::span<const double> weights,
                           int out_channels, int k, std::span<double> grad_in);
void conv2d_backward_params(std::span<const double> in, Planes in_shape, std::span<const double> grad_out,
                            int out_channels, int k, std::span<double> grad_weights, std::span<double> grad_bias);

}  // namespace reference

}  // namespace selfseg::kernels
