// Times the OpenMP kernels against their serial references, plus one full
// training step of the default student network.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "selfseg/kernels.hpp"
#include "selfseg/phantom.hpp"
#include "selfseg/random.hpp"
#include "selfseg/student.hpp"

using namespace selfseg;
using h_clock = std::chrono::steady_clock;

namespace {

double time_ms(int reps, const std::function<void()>& f) {
  f();
  const auto t0 = h_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double, std::milli>(h_clock::now() - t0).count() / reps;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);

  const int h = 96, w = 96, cin = 16, cout = 8, k = 3;
  const kernels::Planes shape{cin, h, w};
  const auto in = random_vector(shape.size(), rng);
  const auto weights = random_vector(static_cast<std::size_t>(cin) * cout * k * k, rng);
  const auto bias = random_vector(cout, rng);
  const auto grad_out = random_vector(static_cast<std::size_t>(cout) * h * w, rng);
  std::vector<double> out(static_cast<std::size_t>(cout) * h * w), grad_in(shape.size());
  std::vector<double> gw(weights.size()), gb(bias.size());

  row("conv2d_forward 16->8 96x96",
      time_ms(5, [&] { kernels::reference::conv2d_forward(in, shape, weights, bias, cout, k, out); }),
      time_ms(20, [&] { kernels::conv2d_forward(in, shape, weights, bias, cout, k, out); }));
  row("conv2d_backward_input",
      time_ms(5, [&] { kernels::reference::conv2d_backward_input(grad_out, shape, weights, cout, k, grad_in); }),
      time_ms(20, [&] { kernels::conv2d_backward_input(grad_out, shape, weights, cout, k, grad_in); }));
  row("conv2d_backward_params",
      time_ms(5, [&] { kernels::reference::conv2d_backward_params(in, shape, grad_out, cout, k, gw, gb); }),
      time_ms(20, [&] { kernels::conv2d_backward_params(in, shape, grad_out, cout, k, gw, gb); }));

  const Phantom p = generate_phantom(PhantomConfig{});
  std::vector<double> mean(p.image.size()), median(p.image.size());
  row("window_stats r=2 96x96",
      time_ms(5, [&] { kernels::reference::window_stats(p.image.values(), w, h, 2, mean, median); }),
      time_ms(20, [&] { kernels::window_stats(p.image.values(), w, h, 2, mean, median); }));

  const StudentParams params = init_params(NetConfig{});
  const double step = time_ms(5, [&] { (void)loss_and_gradient(params, p.image, p.ground_truth); });
  std::printf("training step (depth 2, base 8, 96x96): %.2f ms, %zu parameters\n", step, params.values.size());
  return 0;
}
