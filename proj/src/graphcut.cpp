#include "selfseg/graphcut.hpp"

#include <algorithm>
#include <cmath>

#include "selfseg/error.hpp"
#include "selfseg/maxflow.hpp"

namespace selfseg {

namespace {

void check_labels(const LabelMap& labels, const GridEnergy& energy) {
  if (labels.width() != energy.width || labels.height() != energy.height) {
    throw dimension_error("label map and energy dimensions differ");
  }
  for (auto c : labels.codes()) {
    if (c > 2) throw invalid_error("labels must be region codes (Other, Tissue, Cyst)");
  }
}

inline double potts(Label a, Label b, double w) { return a == b ? 0.0 : w; }

}  // namespace

int region_index(Label l) {
  switch (l) {
    case Label::Cyst: return 0;
    case Label::Tissue: return 1;
    case Label::Other: return 2;
    default: throw invalid_error("Ignore is not a region label");
  }
}

GridEnergy build_energy(const Image& image, const IntensityCenters& c, const EnergyParams& params) {
  if (!(c.cyst < c.tissue && c.tissue < c.other)) throw invalid_error("cluster centers must be strictly increasing");
  if (!(params.delta >= 0.0)) throw invalid_error("delta must be >= 0");
  const int w = image.width(), h = image.height();
  GridEnergy e{w, h, {}, {}, {}};
  e.data.resize(image.size());
  e.weight_right.assign(image.size(), 0.0);
  e.weight_down.assign(image.size(), 0.0);
  const auto v = image.values();
  for (std::size_t p = 0; p < image.size(); ++p) {
    const double i = v[p];
    e.data[p] = {(i - c.cyst) * (i - c.cyst), (i - c.tissue) * (i - c.tissue), (i - c.other) * (i - c.other)};
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = image.index(x, y);
      auto weight = [&](std::size_t q) {
        if (params.pairwise_mode == PairwiseMode::LiteralValues && v[p] == v[q]) return 0.0;
        return params.delta;
      };
      if (x + 1 < w) e.weight_right[p] = weight(p + 1);
      if (y + 1 < h) e.weight_down[p] = weight(p + w);
    }
  }
  return e;
}

GridEnergy make_energy(int width, int height, std::vector<std::array<double, 3>> data, double delta) {
  if (data.size() != static_cast<std::size_t>(width) * height) throw dimension_error("data cost size mismatch");
  for (const auto& d : data) {
    for (double x : d) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw invalid_error("data costs must be finite and non-negative");
    }
  }
  if (!(delta >= 0.0)) throw invalid_error("delta must be >= 0");
  GridEnergy e{width, height, std::move(data), {}, {}};
  e.weight_right.assign(e.data.size(), 0.0);
  e.weight_down.assign(e.data.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      if (x + 1 < width) e.weight_right[p] = delta;
      if (y + 1 < height) e.weight_down[p] = delta;
    }
  }
  return e;
}

double total_energy(const LabelMap& labels, const GridEnergy& e) {
  check_labels(labels, e);
  double data = 0.0;
  double pair = 0.0;
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * e.width + x;
      data += e.data[p][region_index(labels[p])];
      if (x + 1 < e.width) pair += potts(labels[p], labels[p + 1], e.weight_right[p]);
      if (y + 1 < e.height) pair += potts(labels[p], labels[p + e.width], e.weight_down[p]);
    }
  }
  return data + pair;
}

LabelMap expansion_move(const LabelMap& labels, Label alpha, const GridEnergy& e) {
  check_labels(labels, e);
  const int a_idx = region_index(alpha);
  const int n = static_cast<int>(e.size());
  const int s = n, t = n + 1;
  FlowNetwork g(n + 2, s, t);

  // Binary variable per pixel: source side keeps its label, sink side takes
  // alpha. Unary E(0) goes on p->t, E(1) on s->p.
  std::vector<double> keep(n), take(n);
  for (int p = 0; p < n; ++p) {
    keep[p] = e.data[p][region_index(labels[p])];
    take[p] = e.data[p][a_idx];
  }
  auto pairwise = [&](int p, int q, double w) {
    if (w <= 0.0) return;
    const Label lp = labels[p], lq = labels[q];
    const double A = potts(lp, lq, w);     // keep, keep
    const double B = potts(lp, alpha, w);  // keep, take
    const double C = potts(alpha, lq, w);  // take, keep
    // With D = 0: E = A + (C - A) x_p - C x_q + (B + C - A) (1 - x_p) x_q.
    take[p] += C - A;
    take[q] -= C;
    const double cross = B + C - A;  // >= 0 by the triangle inequality
    if (cross > 0.0) g.add_edge(p, q, cross);
  };
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      const int p = y * e.width + x;
      if (x + 1 < e.width) pairwise(p, p + 1, e.weight_right[p]);
      if (y + 1 < e.height) pairwise(p, p + e.width, e.weight_down[p]);
    }
  }
  for (int p = 0; p < n; ++p) {
    // Shift so both terminal capacities are non-negative.
    const double lo = std::min(keep[p], take[p]);
    const double cap_take = take[p] - lo;
    const double cap_keep = keep[p] - lo;
    if (cap_take > 0.0) g.add_edge(s, p, cap_take);
    if (cap_keep > 0.0) g.add_edge(p, t, cap_keep);
  }

  const MaxflowResult cut = maxflow(g);
  LabelMap out = labels;
  for (int p = 0; p < n; ++p) {
    if (!cut.in_source_side[p]) out.set(static_cast<std::size_t>(p), alpha);
  }
  // Exact in real arithmetic; guard against rounding in the reduction.
  if (total_energy(out, e) > total_energy(labels, e)) return labels;
  return out;
}

LabelMap alpha_expansion(const LabelMap& init, const GridEnergy& e, int max_sweeps, ExpansionTrace* trace) {
  check_labels(init, e);
  LabelMap current = init;
  double energy = total_energy(current, e);
  if (trace) {
    trace->energies.assign(1, energy);
    trace->sweeps = 0;
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (Label alpha : kRegionLabels) {
      LabelMap next = expansion_move(current, alpha, e);
      const double next_energy = total_energy(next, e);
      if (next_energy < energy) {
        current = std::move(next);
        energy = next_energy;
        improved = true;
      }
      if (trace) trace->energies.push_back(energy);
    }
    if (trace) trace->sweeps = sweep + 1;
    if (!improved) break;
  }
  return current;
}

LabelMap data_argmin(const GridEnergy& e) {
  LabelMap out(e.width, e.height);
  for (std::size_t p = 0; p < e.size(); ++p) {
    int best = 0;
    for (int l = 1; l < 3; ++l) {
      if (e.data[p][l] < e.data[p][best]) best = l;
    }
    out.set(p, kRegionLabels[best]);
  }
  return out;
}

LabelMap refine(const Image& image, const LabelMap& kmeans_labels, const IntensityCenters& centers,
                const EnergyParams& params, int max_sweeps, ExpansionTrace* trace) {
  const GridEnergy energy = build_energy(image, centers, params);
  return alpha_expansion(kmeans_labels, energy, max_sweeps, trace);
}

}  // namespace selfseg
