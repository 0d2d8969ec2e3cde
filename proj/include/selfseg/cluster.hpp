#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "selfseg/dataset.hpp"

namespace selfseg {

using Feature = std::array<double, 3>;

// Per-pixel (intensity, window mean, window median).
struct FeatureField {
  int width = 0;
  int height = 0;
  std::vector<Feature> features;
};

FeatureField extract_features(const Image& image, int window_radius = 2);

struct IntensityCenters {
  double cyst = 0.0;    // c1, darkest
  double tissue = 0.0;  // c2
  double other = 0.0;   // c3, brightest
};

struct ClusterModel {
  int k = 0;
  std::vector<Feature> centers;
  // Center indices sorted by ascending intensity coordinate.
  std::vector<int> order;
  IntensityCenters intensity_centers;
};

// Builds the intensity ordering for a set of centers; throws a
// degenerate-input error when two intensity coordinates tie.
ClusterModel model_from_centers(std::vector<Feature> centers);

struct KMeansOptions {
  int k = 3;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-6;
  // Independent k-means++ seedings drawn from one seeded stream; the fit
  // with the lowest final WCSS is kept.
  int restarts = 10;
};

struct KMeansTrace {
  // Within-cluster sum of squares after each Lloyd iteration of the kept
  // restart (entry 0 is its k-means++ seeding). Non-increasing by
  // construction.
  std::vector<double> wcss;
  int iterations = 0;
  // The same sequence for every restart, kept one included.
  std::vector<std::vector<double>> restarts;
};

// Seeded k-means++ then Lloyd, repeated `restarts` times. Empty clusters are re-seeded at the point
// farthest from its assigned center (lowest index on ties). Throws a
// degenerate-input error when fewer than k distinct feature points exist or
// when the three intensity centers tie.
ClusterModel kmeans_fit(const FeatureField& field, const KMeansOptions& options = {}, KMeansTrace* trace = nullptr);

// Within-cluster sum of squares of the nearest-center assignment.
double wcss(const FeatureField& field, const std::vector<Feature>& centers);

// Darkest center -> Cyst, middle -> Tissue, brightest -> Other. Ties go to the
// darker cluster (Cyst before Tissue before Other).
LabelMap assign_labels(const ClusterModel& model, const FeatureField& field);

}  // namespace selfseg
