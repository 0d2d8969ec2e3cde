#include "selfseg/kernels.hpp"

#include <algorithm>
#include <vector>

namespace selfseg::kernels {

namespace {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Valid output range [lo, hi) along one axis for kernel tap offset d.
inline void tap_range(int d, int n, int& lo, int& hi) {
  lo = std::max(0, -d);
  hi = std::min(n, n - d);
}

}  // namespace

void window_stats(std::span<const double> image, int width, int height, int radius, std::span<double> mean,
                  std::span<double> median) {
  const int side = 2 * radius + 1;
  const int count = side * side;
#pragma omp parallel
  {
    std::vector<double> window(static_cast<std::size_t>(count));
#pragma omp for schedule(static)
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        int n = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const double* row = image.data() + static_cast<std::size_t>(clamp_index(y + dy, height)) * width;
          for (int dx = -radius; dx <= radius; ++dx) window[n++] = row[clamp_index(x + dx, width)];
        }
        // Sum in window order so the mean matches the reference bit for bit.
        double sum = 0.0;
        for (double v : window) sum += v;
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        mean[i] = sum / count;
        auto mid = window.begin() + count / 2;
        std::nth_element(window.begin(), mid, window.end());
        median[i] = *mid;
      }
    }
  }
}

void conv2d_forward(std::span<const double> in, Planes s, std::span<const double> weights,
                    std::span<const double> bias, int out_channels, int k, std::span<double> out) {
  const int pad = k / 2;
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < out_channels; ++co) {
    double* dst = out.data() + co * plane;
    std::fill(dst, dst + plane, bias[co]);
    for (int ci = 0; ci < s.channels; ++ci) {
      const double* src = in.data() + ci * plane;
      const double* w = weights.data() + (static_cast<std::size_t>(co) * s.channels + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        int y0, y1;
        tap_range(dy, s.height, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          int x0, x1;
          tap_range(dx, s.width, x0, x1);
          const double wv = w[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            double* o = dst + static_cast<std::size_t>(y) * s.width;
            const double* iv = src + static_cast<std::size_t>(y + dy) * s.width + dx;
            for (int x = x0; x < x1; ++x) o[x] += wv * iv[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> grad_out, Planes s, std::span<const double> weights,
                           int out_channels, int k, std::span<double> grad_in) {
  const int pad = k / 2;
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < s.channels; ++ci) {
    double* gi = grad_in.data() + ci * plane;
    for (int co = 0; co < out_channels; ++co) {
      const double* go = grad_out.data() + co * plane;
      const double* w = weights.data() + (static_cast<std::size_t>(co) * s.channels + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        int y0, y1;
        tap_range(dy, s.height, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          int x0, x1;
          tap_range(dx, s.width, x0, x1);
          const double wv = w[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            const double* g = go + static_cast<std::size_t>(y) * s.width;
            double* t = gi + static_cast<std::size_t>(y + dy) * s.width + dx;
            for (int x = x0; x < x1; ++x) t[x] += wv * g[x];
          }
        }
      }
    }
  }
}

void conv2d_backward_params(std::span<const double> in, Planes s, std::span<const double> grad_out,
                            int out_channels, int k, std::span<double> grad_weights, std::span<double> grad_bias) {
  const int pad = k / 2;
  const int taps = k * k;
  const std::size_t plane = s.plane();
  const int pw = s.width + 2 * pad;
  const std::size_t padded_plane = static_cast<std::size_t>(s.height + 2 * pad) * pw;
  // Zero-padded copy of the input so every tap reads in bounds.
  std::vector<double> padded(padded_plane * s.channels, 0.0);
  for (int ci = 0; ci < s.channels; ++ci) {
    for (int y = 0; y < s.height; ++y) {
      std::copy_n(in.data() + ci * plane + static_cast<std::size_t>(y) * s.width, s.width,
                  padded.data() + ci * padded_plane + static_cast<std::size_t>(y + pad) * pw + pad);
    }
  }
#pragma omp parallel
  {
    std::vector<double> acc(static_cast<std::size_t>(taps));
#pragma omp for schedule(static)
    for (int co = 0; co < out_channels; ++co) {
      const double* go = grad_out.data() + co * plane;
      double b = 0.0;
      for (std::size_t i = 0; i < plane; ++i) b += go[i];
      grad_bias[co] += b;
      for (int ci = 0; ci < s.channels; ++ci) {
        const double* src = padded.data() + ci * padded_plane;
        std::fill(acc.begin(), acc.end(), 0.0);
        // One running sum per tap: independent chains instead of a single
        // serial reduction per tap. The 3x3 case keeps them in registers.
        if (k == 3) {
          double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
          for (int y = 0; y < s.height; ++y) {
            const double* g = go + static_cast<std::size_t>(y) * s.width;
            const double* r0 = src + static_cast<std::size_t>(y) * pw;
            const double* r1 = r0 + pw;
            const double* r2 = r1 + pw;
            for (int x = 0; x < s.width; ++x) {
              const double gv = g[x];
              a0 += gv * r0[x];
              a1 += gv * r0[x + 1];
              a2 += gv * r0[x + 2];
              a3 += gv * r1[x];
              a4 += gv * r1[x + 1];
              a5 += gv * r1[x + 2];
              a6 += gv * r2[x];
              a7 += gv * r2[x + 1];
              a8 += gv * r2[x + 2];
            }
          }
          acc = {a0, a1, a2, a3, a4, a5, a6, a7, a8};
        } else {
        for (int y = 0; y < s.height; ++y) {
          const double* g = go + static_cast<std::size_t>(y) * s.width;
          for (int ky = 0; ky < k; ++ky) {
            const double* row = src + static_cast<std::size_t>(y + ky) * pw;
            for (int x = 0; x < s.width; ++x) {
              const double gv = g[x];
              for (int kx = 0; kx < k; ++kx) acc[ky * k + kx] += gv * row[x + kx];
            }
          }
        }
        }
        double* gw = grad_weights.data() + (static_cast<std::size_t>(co) * s.channels + ci) * taps;
        for (int t = 0; t < taps; ++t) gw[t] += acc[t];
      }
    }
  }
}

namespace reference {

void window_stats(std::span<const double> image, int width, int height, int radius, std::span<double> mean,
                  std::span<double> median) {
  std::vector<double> window;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      window.clear();
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          window.push_back(image[static_cast<std::size_t>(clamp_index(y + dy, height)) * width +
                                 clamp_index(x + dx, width)]);
        }
      }
      double sum = 0.0;
      for (double v : window) sum += v;
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      mean[i] = sum / static_cast<double>(window.size());
      std::sort(window.begin(), window.end());
      median[i] = window[window.size() / 2];
    }
  }
}

void conv2d_forward(std::span<const double> in, Planes s, std::span<const double> weights,
                    std::span<const double> bias, int out_channels, int k, std::span<double> out) {
  const int pad = k / 2;
  for (int co = 0; co < out_channels; ++co) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < s.channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int yy = y + ky - pad, xx = x + kx - pad;
              if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
              acc += weights[((static_cast<std::size_t>(co) * s.channels + ci) * k + ky) * k + kx] *
                     in[(static_cast<std::size_t>(ci) * s.height + yy) * s.width + xx];
            }
          }
        }
        out[(static_cast<std::size_t>(co) * s.height + y) * s.width + x] = acc;
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> grad_out, Planes s, std::span<const double> weights,
                           int out_channels, int k, std::span<double> grad_in) {
  const int pad = k / 2;
  for (int co = 0; co < out_channels; ++co) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double g = grad_out[(static_cast<std::size_t>(co) * s.height + y) * s.width + x];
        for (int ci = 0; ci < s.channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int yy = y + ky - pad, xx = x + kx - pad;
              if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
              grad_in[(static_cast<std::size_t>(ci) * s.height + yy) * s.width + xx] +=
                  g * weights[((static_cast<std::size_t>(co) * s.channels + ci) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(std::span<const double> in, Planes s, std::span<const double> grad_out,
                            int out_channels, int k, std::span<double> grad_weights, std::span<double> grad_bias) {
  const int pad = k / 2;
  for (int co = 0; co < out_channels; ++co) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double g = grad_out[(static_cast<std::size_t>(co) * s.height + y) * s.width + x];
        grad_bias[co] += g;
        for (int ci = 0; ci < s.channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int yy = y + ky - pad, xx = x + kx - pad;
              if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
              grad_weights[((static_cast<std::size_t>(co) * s.channels + ci) * k + ky) * k + kx] +=
                  g * in[(static_cast<std::size_t>(ci) * s.height + yy) * s.width + xx];
            }
          }
        }
      }
    }
  }
}

}  // namespace reference

}  // namespace selfseg::kernels
