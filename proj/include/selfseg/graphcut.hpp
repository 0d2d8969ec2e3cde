#pragma once

#include <array>
#include <vector>

#include "selfseg/cluster.hpp"
#include "selfseg/dataset.hpp"

namespace selfseg {

enum class PairwiseMode {
  PottsLabels,    // delta whenever neighbouring labels differ
  LiteralValues,  // delta only when neighbouring labels differ and intensities differ
};

struct EnergyParams {
  double delta = 0.003;
  PairwiseMode pairwise_mode = PairwiseMode::PottsLabels;
};

// The three region labels in sweep order.
inline constexpr std::array<Label, 3> kRegionLabels = {Label::Cyst, Label::Tissue, Label::Other};

// Dense index of a region label into per-pixel cost triples.
int region_index(Label l);

// Data costs per pixel per region label plus 4-neighbour Potts weights.
struct GridEnergy {
  int width = 0;
  int height = 0;
  // data[p][region_index(l)]
  std::vector<std::array<double, 3>> data;
  // Weight of the edge (p, p+1) and (p, p+width); zero past the border.
  std::vector<double> weight_right;
  std::vector<double> weight_down;

  std::size_t size() const noexcept { return data.size(); }
};

// data = (I_p - c_l)^2; pairwise weight = delta on every edge (Potts mode).
GridEnergy build_energy(const Image& image, const IntensityCenters& centers, const EnergyParams& params = {});

// Energy with explicit data costs and a uniform Potts weight.
GridEnergy make_energy(int width, int height, std::vector<std::array<double, 3>> data, double delta);

double total_energy(const LabelMap& labels, const GridEnergy& energy);

// Best labeling reachable by letting every pixel keep its label or switch to
// alpha, found with one binary min cut. Never returns a labeling with higher
// energy than the input.
LabelMap expansion_move(const LabelMap& labels, Label alpha, const GridEnergy& energy);

struct ExpansionTrace {
  // Energy before the first move followed by the energy after every move.
  std::vector<double> energies;
  int sweeps = 0;
};

// Cycles expansion moves over (Cyst, Tissue, Other) until a sweep makes no
// progress or max_sweeps is reached.
LabelMap alpha_expansion(const LabelMap& init, const GridEnergy& energy, int max_sweeps = 10,
                         ExpansionTrace* trace = nullptr);

// Per-pixel argmin of the data term (ties to the darker region).
LabelMap data_argmin(const GridEnergy& energy);

// Graph-cut refinement of a k-means labeling: build_energy then
// alpha_expansion seeded with kmeans_labels.
LabelMap refine(const Image& image, const LabelMap& kmeans_labels, const IntensityCenters& centers,
                const EnergyParams& params = {}, int max_sweeps = 10, ExpansionTrace* trace = nullptr);

}  // namespace selfseg
