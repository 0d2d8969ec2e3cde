#include <cmath>

#include "doctest.h"
#include "grid_fixture.hpp"
#include "oracles.hpp"
#include "selfseg/graphcut.hpp"
#include "selfseg/phantom.hpp"
#include "selfseg/selftrain.hpp"

using namespace selfseg;

using oracle::corner;
using oracle::padded_labels;
using oracle::random_problem;

namespace {

std::vector<int> dense(const LabelMap& l) {
  std::vector<int> out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = region_index(l[i]);
  return out;
}

LabelMap from_dense(int w, int h, const std::vector<int>& d) {
  LabelMap l(w, h);
  for (std::size_t i = 0; i < d.size(); ++i) l.set(i, kRegionLabels[d[i]]);
  return l;
}

}  // namespace

TEST_SUITE("graphcut") {
  TEST_CASE("build_energy data costs") {
    Image img(8, 8, 0.5);
    img(1, 0) = 0.35;
    const GridEnergy e = build_energy(img, {0.1, 0.35, 0.8});
    CHECK(e.data[0][0] == doctest::Approx(0.16).epsilon(1e-14));
    CHECK(e.data[0][1] == doctest::Approx(0.0225).epsilon(1e-14));
    CHECK(e.data[0][2] == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(e.data[1][region_index(Label::Tissue)] == 0.0);
    CHECK(e.weight_right[0] == 0.003);
    CHECK(e.weight_right[7] == 0.0);
    CHECK(e.weight_down[63] == 0.0);
    CHECK_THROWS(build_energy(img, {0.35, 0.35, 0.8}));
  }

  TEST_CASE("zero delta removes the pairwise term") {
    Rng rng(1);
    const LabelMap l = from_dense(8, 8, std::vector<int>(64, 0));
    Image img(8, 8);
    for (auto& v : img.values()) v = rng.uniform();
    const GridEnergy e = build_energy(img, {0.1, 0.35, 0.8}, {0.0});
    std::vector<int> mixed(64);
    for (auto& m : mixed) m = static_cast<int>(rng.below(3));
    double data = 0.0;
    for (int p = 0; p < 64; ++p) data += e.data[p][mixed[p]];
    CHECK(total_energy(from_dense(8, 8, mixed), e) == doctest::Approx(data).epsilon(1e-14));
    (void)l;
  }

  TEST_CASE("total_energy matches direct summation") {
    Rng rng(5);
    const GridEnergy uniform = make_energy(8, 8, std::vector<std::array<double, 3>>(64, {0.1, 0.2, 0.3}), 0.7);
    CHECK(total_energy(LabelMap(8, 8, Label::Tissue), uniform) == doctest::Approx(64 * 0.2).epsilon(1e-14));

    // Exactly one differing edge costs delta.
    LabelMap one(8, 8, Label::Tissue);
    one.set(7, 7, Label::Cyst);
    const double expected = 63 * 0.2 + 0.1 + 2 * 0.7;  // (7,7) is a corner with two edges
    CHECK(total_energy(one, uniform) == doctest::Approx(expected).epsilon(1e-14));

    for (int trial = 0; trial < 20; ++trial) {
      auto [problem, energy] = random_problem(rng, 2, 2, rng.uniform(0, 0.5));
      std::vector<int> c(4);
      for (auto& v : c) v = static_cast<int>(rng.below(3));
      const LabelMap l = padded_labels(c, 2, 2);
      // Padding pixels are Other with zero data cost and zero-weight edges.
      CHECK(total_energy(l, energy) == doctest::Approx(problem.energy(c)).epsilon(1e-12));
    }
  }

  TEST_CASE("expansion_move fixed point and decoupled case") {
    Rng rng(8);
    const auto [problem, energy] = random_problem(rng, 8, 8, 0.2);
    const LabelMap all_tissue(8, 8, Label::Tissue);
    CHECK(expansion_move(all_tissue, Label::Tissue, energy) == all_tissue);

    const auto [p0, e0] = random_problem(rng, 8, 8, 0.0);
    std::vector<int> init(64);
    for (auto& v : init) v = static_cast<int>(rng.below(3));
    const LabelMap start = from_dense(8, 8, init);
    const LabelMap moved = expansion_move(start, Label::Cyst, e0);
    for (int p = 0; p < 64; ++p) {
      const bool take = e0.data[p][0] < e0.data[p][init[p]];
      CHECK(moved[p] == (take ? Label::Cyst : start[p]));
    }
  }

  TEST_CASE("expansion_move matches exhaustive keep-or-switch search on 2x2") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      auto [problem, energy] = random_problem(rng, 2, 2, rng.uniform(0, 0.6));
      std::vector<int> c(4);
      for (auto& v : c) v = static_cast<int>(rng.below(3));
      const int alpha = static_cast<int>(rng.below(3));
      double best = std::numeric_limits<double>::infinity();
      for (unsigned mask = 0; mask < 16; ++mask) {
        auto trial_labels = c;
        for (int i = 0; i < 4; ++i) {
          if ((mask >> i) & 1u) trial_labels[i] = alpha;
        }
        best = std::min(best, problem.energy(trial_labels));
      }
      const LabelMap out = expansion_move(padded_labels(c, 2, 2), kRegionLabels[alpha], energy);
      const auto got = corner(out, 2, 2);
      for (int i = 0; i < 4; ++i) CHECK((got[i] == c[i] || got[i] == alpha));
      CHECK(problem.energy(got) == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("alpha_expansion with zero delta is the data argmin") {
    Rng rng(4);
    const auto [problem, energy] = random_problem(rng, 8, 8, 0.0);
    CHECK(alpha_expansion(LabelMap(8, 8, Label::Other), energy) == data_argmin(energy));
  }

  TEST_CASE("alpha_expansion is near-optimal on 3x4 grids") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
      auto [problem, energy] = random_problem(rng, 3, 4, rng.uniform(0, 0.5));
      const double opt = problem.brute_optimum();
      ExpansionTrace trace;
      const LabelMap out = alpha_expansion(LabelMap(8, 8, Label::Other), energy, 10, &trace);
      const double got = problem.energy(corner(out, 3, 4));
      CHECK(got >= opt - 1e-12);
      CHECK(got <= 1.05 * opt + 1e-12);
      for (std::size_t i = 1; i < trace.energies.size(); ++i) CHECK(trace.energies[i] <= trace.energies[i - 1]);
    }
  }

  TEST_CASE("two-label energies are solved exactly") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
      const int w = rng.between(2, 4), h = rng.between(2, 4);
      auto [problem, energy] = random_problem(rng, w, h, rng.uniform(0, 0.6), 2);
      const double opt = problem.brute_optimum(2);
      std::vector<int> init(w * h);
      for (auto& v : init) v = static_cast<int>(rng.below(2));
      const LabelMap out = alpha_expansion(padded_labels(init, w, h), energy);
      CHECK(problem.energy(corner(out, w, h)) == doctest::Approx(opt).epsilon(1e-12));
    }
  }

  TEST_CASE("homogeneous image collapses to one label above the dominance threshold") {
    Rng rng(6);
    Image img(12, 12);
    const double base = 0.3, spread = 0.02;
    for (auto& v : img.values()) v = base + rng.uniform(0, spread);
    // Centers tuned so pixels near base prefer Cyst and those near base+spread
    // prefer Tissue; every per-pixel data gap is at most spread^2... scaled.
    const IntensityCenters c{base, base + spread, 0.9};
    // Data-cost gap between the two nearest labels is < 2 * spread^2 for any
    // pixel, and a lone switched pixel pays at least 2 edges.
    const GridEnergy e = build_energy(img, c, {spread * spread + 1e-6});
    const LabelMap out = alpha_expansion(data_argmin(e), e);
    const Label first = out[0];
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == first);
  }

  TEST_CASE("refine: decoupled and monotone") {
    PhantomConfig pc;
    pc.seed = 3;
    pc.noise_sigma = 0.08;
    const Phantom p = generate_phantom(pc);
    const FeatureField f = extract_features(p.image, 2);
    const ClusterModel m = kmeans_fit(f);
    const LabelMap km = assign_labels(m, f);

    const GridEnergy e0 = build_energy(p.image, m.intensity_centers, {0.0});
    CHECK(refine(p.image, km, m.intensity_centers, {0.0}) == data_argmin(e0));

    const GridEnergy e = build_energy(p.image, m.intensity_centers);
    ExpansionTrace trace;
    const LabelMap r = refine(p.image, km, m.intensity_centers, {}, 10, &trace);
    CHECK(total_energy(r, e) <= total_energy(km, e));
    for (std::size_t i = 1; i < trace.energies.size(); ++i) CHECK(trace.energies[i] <= trace.energies[i - 1]);
    CHECK(trace.sweeps <= 10);
  }

  TEST_CASE("refine recovers a noiseless phantom exactly") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      PhantomConfig pc;
      pc.seed = seed;
      pc.noise_sigma = 0.0;
      pc.texture_amplitude = 0.0;
      const Phantom p = generate_phantom(pc);
      CHECK(sk_gc(p.image, SelfTrainConfig{}) == p.ground_truth);
    }
  }

  TEST_CASE("literal-values mode frees edges between equal intensities") {
    Image img(8, 8, 0.3);
    img(0, 0) = 0.6;
    const GridEnergy e = build_energy(img, {0.1, 0.35, 0.8}, {0.003, PairwiseMode::LiteralValues});
    CHECK(e.weight_right[0] == 0.003);
    CHECK(e.weight_right[1] == 0.0);
    CHECK(e.weight_down[0] == 0.003);
    CHECK(e.weight_down[1] == 0.0);
  }
}
