#pragma once

// Tiny grid energies embedded in the 8x8 minimum image size, for comparison
// against GridProblem's brute-force optimum.

#include <array>
#include <vector>

#include "oracles.hpp"
#include "selfseg/graphcut.hpp"

namespace oracle {

// Random energy padded to the 8x8 minimum: pixels outside the w x h corner
// are pinned to Other with zero-weight edges into the corner.
struct Padded {
  GridProblem problem;
  selfseg::GridEnergy energy;
};

inline Padded random_problem(selfseg::Rng& rng, int w, int h, double delta, int labels = 3) {
  GridProblem p{w, h, {}, delta};
  for (int i = 0; i < w * h; ++i) {
    std::array<double, 3> d{};
    for (int l = 0; l < 3; ++l) d[l] = l < labels ? rng.uniform() : 1e6;
    p.data.push_back(d);
  }
  std::vector<std::array<double, 3>> full(64, {1e6, 1e6, 0.0});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) full[y * 8 + x] = p.data[y * w + x];
  }
  selfseg::GridEnergy e = selfseg::make_energy(8, 8, full, delta);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const int q = y * 8 + x;
      const bool in = x < w && y < h;
      if (!in || x + 1 >= w) e.weight_right[q] = 0.0;
      if (!in || y + 1 >= h) e.weight_down[q] = 0.0;
    }
  }
  return {p, e};
}

inline std::vector<int> corner(const selfseg::LabelMap& l, int w, int h) {
  std::vector<int> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.push_back(selfseg::region_index(l.at(x, y)));
  }
  return out;
}

inline selfseg::LabelMap padded_labels(const std::vector<int>& c, int w, int h) {
  selfseg::LabelMap l(8, 8, selfseg::Label::Other);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) l.set(x, y, selfseg::kRegionLabels[c[y * w + x]]);
  }
  return l;
}

}  // namespace oracle
