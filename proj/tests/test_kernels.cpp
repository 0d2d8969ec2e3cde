#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "selfseg/kernels.hpp"
#include "selfseg/random.hpp"

using namespace selfseg;
using namespace selfseg::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

// Convolution straight from the definition, with explicit bounds checks.
double direct_conv(const std::vector<double>& in, Planes s, const std::vector<double>& w, double b, int o, int k, int y,
                   int x) {
  double acc = b;
  const int r = k / 2;
  for (int c = 0; c < s.channels; ++c) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
        acc += w[((o * s.channels + c) * k + dy + r) * k + dx + r] * in[(c * s.height + yy) * s.width + xx];
      }
    }
  }
  return acc;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("window_stats on a hand-checked 3x3 grid") {
    const std::vector<double> img = {0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6};
    std::vector<double> mean(9), median(9);
    window_stats(img, 3, 3, 1, mean, median);
    CHECK(mean[4] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(median[4] == 0.5);
    // Corner (0,0) with edge replication: rows {0.9,0.9,0.1} {0.9,0.9,0.1} {0.3,0.3,0.7}.
    CHECK(mean[0] == doctest::Approx((0.9 * 4 + 0.1 * 2 + 0.3 * 2 + 0.7) / 9).epsilon(1e-14));
    // Sorted: 0.1 0.1 0.3 0.3 0.7 0.9 0.9 0.9 0.9.
    CHECK(median[0] == 0.7);
  }

  TEST_CASE("window_stats matches the reference") {
    Rng rng(3);
    for (int r : {1, 2, 3}) {
      const int w = 17, h = 11;
      std::vector<double> img(w * h);
      for (auto& v : img) v = rng.uniform();
      std::vector<double> m1(img.size()), d1(img.size()), m2(img.size()), d2(img.size());
      window_stats(img, w, h, r, m1, d1);
      reference::window_stats(img, w, h, r, m2, d2);
      check_close(m1, m2);
      CHECK(d1 == d2);
    }
  }

  TEST_CASE("conv2d_forward matches the direct definition") {
    Rng rng(4);
    for (int k : {1, 3}) {
      const Planes s{3, 6, 5};
      const int out_c = 4;
      const auto in = random_vec(rng, s.size());
      const auto w = random_vec(rng, static_cast<std::size_t>(out_c) * s.channels * k * k);
      const auto b = random_vec(rng, out_c);
      std::vector<double> out(out_c * s.plane()), ref(out.size());
      conv2d_forward(in, s, w, b, out_c, k, out);
      reference::conv2d_forward(in, s, w, b, out_c, k, ref);
      check_close(out, ref);
      for (int o = 0; o < out_c; ++o) {
        for (int y = 0; y < s.height; ++y) {
          for (int x = 0; x < s.width; ++x) {
            CHECK(out[(o * s.height + y) * s.width + x] ==
                  doctest::Approx(direct_conv(in, s, w, b[o], o, k, y, x)).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("backward kernels match the reference and the adjoint identity") {
    Rng rng(5);
    const Planes s{2, 8, 7};
    const int out_c = 3, k = 3;
    const auto in = random_vec(rng, s.size());
    const auto w = random_vec(rng, static_cast<std::size_t>(out_c) * s.channels * k * k);
    const auto g = random_vec(rng, out_c * s.plane());

    std::vector<double> gi(s.size(), 0.0), gi_ref(s.size(), 0.0);
    conv2d_backward_input(g, s, w, out_c, k, gi);
    reference::conv2d_backward_input(g, s, w, out_c, k, gi_ref);
    check_close(gi, gi_ref);

    std::vector<double> gw(w.size(), 0.0), gb(out_c, 0.0), gw_ref(w.size(), 0.0), gb_ref(out_c, 0.0);
    conv2d_backward_params(in, s, g, out_c, k, gw, gb);
    reference::conv2d_backward_params(in, s, g, out_c, k, gw_ref, gb_ref);
    check_close(gw, gw_ref);
    check_close(gb, gb_ref);

    // <g, conv(in)> without bias is linear in both in and w, so
    // <g, conv(in)> = <grad_in, in> = <grad_w, w>.
    std::vector<double> out(g.size());
    const std::vector<double> zero_bias(out_c, 0.0);
    reference::conv2d_forward(in, s, w, zero_bias, out_c, k, out);
    double lhs = 0.0, via_in = 0.0, via_w = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += g[i] * out[i];
    for (std::size_t i = 0; i < in.size(); ++i) via_in += gi[i] * in[i];
    for (std::size_t i = 0; i < w.size(); ++i) via_w += gw[i] * w[i];
    CHECK(via_in == doctest::Approx(lhs).epsilon(1e-12));
    CHECK(via_w == doctest::Approx(lhs).epsilon(1e-12));
    double gsum0 = 0.0;
    for (std::size_t i = 0; i < s.plane(); ++i) gsum0 += g[i];
    CHECK(gb[0] == doctest::Approx(gsum0).epsilon(1e-12));
  }

  TEST_CASE("results do not depend on the thread count") {
    Rng rng(6);
    const Planes s{4, 16, 16};
    const int out_c = 5, k = 3;
    const auto in = random_vec(rng, s.size());
    const auto w = random_vec(rng, static_cast<std::size_t>(out_c) * s.channels * k * k);
    const auto b = random_vec(rng, out_c);
    const auto g = random_vec(rng, out_c * s.plane());
    auto run = [&](int threads) {
      omp_set_num_threads(threads);
      std::vector<double> out(out_c * s.plane()), gi(s.size(), 0.0), gw(w.size(), 0.0), gb(out_c, 0.0);
      conv2d_forward(in, s, w, b, out_c, k, out);
      conv2d_backward_input(g, s, w, out_c, k, gi);
      conv2d_backward_params(in, s, g, out_c, k, gw, gb);
      out.insert(out.end(), gi.begin(), gi.end());
      out.insert(out.end(), gw.begin(), gw.end());
      out.insert(out.end(), gb.begin(), gb.end());
      return out;
    };
    const int saved = omp_get_max_threads();
    const auto one = run(1);
    const auto four = run(4);
    omp_set_num_threads(saved);
    CHECK(one == four);
  }
}
