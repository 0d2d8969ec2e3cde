#include "selfseg/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "selfseg/error.hpp"
#include "selfseg/kernels.hpp"
#include "selfseg/random.hpp"

namespace selfseg {

namespace {

inline double dist2(const Feature& a, const Feature& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

// Nearest center; ties to the lower index.
inline int nearest(const Feature& f, const std::vector<Feature>& centers, double* best_d = nullptr) {
  int best = 0;
  double bd = dist2(f, centers[0]);
  for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
    const double d = dist2(f, centers[c]);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  if (best_d) *best_d = bd;
  return best;
}

// Flat sum in point order; the monotonicity argument relies on this order.
double assigned_wcss(const std::vector<Feature>& pts, const std::vector<int>& assign,
                     const std::vector<Feature>& centers) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += dist2(pts[i], centers[assign[i]]);
  return s;
}

std::vector<Feature> kmeanspp(const std::vector<Feature>& pts, int k, Rng& rng) {
  std::vector<Feature> centers;
  centers.push_back(pts[rng.below(pts.size())]);
  std::vector<double> d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d[i] = dist2(pts[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d.begin(), d.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double run = 0.0;
      pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        run += d[i];
        if (run > r && d[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Rounding at the tail may land on an already-chosen point.
      while (d[pick] <= 0.0 && pick > 0) --pick;
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d[i] = std::min(d[i], dist2(pts[i], centers.back()));
  }
  return centers;
}

// One k-means++ seeding followed by guarded Lloyd iterations.
std::vector<Feature> lloyd(const std::vector<Feature>& pts, int k, Rng& rng, const KMeansOptions& options,
                           KMeansTrace& trace) {
  std::vector<Feature> centers = kmeanspp(pts, k, rng);
  std::vector<int> assign(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) assign[i] = nearest(pts[i], centers);
  double current = assigned_wcss(pts, assign, centers);
  trace.wcss.assign(1, current);
  trace.iterations = 0;

  std::vector<std::size_t> members(k);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    // Assignment step (skipped on the first pass: seeding already assigned).
    if (iter > 0) {
      for (std::size_t i = 0; i < pts.size(); ++i) assign[i] = nearest(pts[i], centers);
    }
    std::fill(members.begin(), members.end(), 0);
    for (int a : assign) ++members[a];
    for (int c = 0; c < k; ++c) {
      if (members[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = dist2(pts[i], centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --members[assign[far]];
      centers[c] = pts[far];
      assign[far] = c;
      ++members[c];
    }

    // Update step.
    std::vector<Feature> sums(k, Feature{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int d = 0; d < 3; ++d) sums[assign[i]][d] += pts[i][d];
    }
    std::vector<Feature> updated = centers;
    double moved = 0.0;
    for (int c = 0; c < k; ++c) {
      if (members[c] == 0) continue;
      for (int d = 0; d < 3; ++d) updated[c][d] = sums[c][d] / static_cast<double>(members[c]);
      moved = std::max(moved, std::sqrt(dist2(updated[c], centers[c])));
    }
    const double before_update = assigned_wcss(pts, assign, centers);
    const double after_update = assigned_wcss(pts, assign, updated);
    // The mean is the exact minimizer; only rounding can make it worse, and
    // then the old centers are already converged.
    const bool accept = after_update <= before_update;
    if (accept) centers = std::move(updated);
    current = accept ? after_update : before_update;
    trace.wcss.push_back(current);
    trace.iterations = iter + 1;
    if (!accept || moved < options.tol) break;
  }

  return centers;
}

}  // namespace

FeatureField extract_features(const Image& image, int window_radius) {
  if (window_radius < 1) throw invalid_error("window_radius must be >= 1");
  FeatureField field{image.width(), image.height(), std::vector<Feature>(image.size())};
  std::vector<double> mean(image.size()), median(image.size());
  kernels::window_stats(image.values(), image.width(), image.height(), window_radius, mean, median);
  const auto v = image.values();
  for (std::size_t i = 0; i < image.size(); ++i) field.features[i] = {v[i], mean[i], median[i]};
  return field;
}

double wcss(const FeatureField& field, const std::vector<Feature>& centers) {
  double s = 0.0;
  for (const auto& f : field.features) {
    double d = 0.0;
    nearest(f, centers, &d);
    s += d;
  }
  return s;
}

ClusterModel kmeans_fit(const FeatureField& field, const KMeansOptions& options, KMeansTrace* trace) {
  const int k = options.k;
  const auto& pts = field.features;
  if (k < 2) throw invalid_error("k-means needs k >= 2");
  if (pts.size() < static_cast<std::size_t>(k)) throw invalid_error("fewer pixels than clusters");
  {
    std::vector<Feature> distinct(pts.begin(), pts.end());
    std::sort(distinct.begin(), distinct.end());
    const auto n = std::unique(distinct.begin(), distinct.end()) - distinct.begin();
    if (n < k) throw degenerate_error("image has fewer distinct feature points than clusters");
  }

  if (options.restarts < 1) throw invalid_error("k-means needs restarts >= 1");
  Rng rng(options.seed);
  std::vector<Feature> best;
  double best_wcss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> all_runs;
  for (int run = 0; run < options.restarts; ++run) {
    KMeansTrace run_trace;
    std::vector<Feature> centers = lloyd(pts, k, rng, options, run_trace);
    if (trace) all_runs.push_back(run_trace.wcss);
    // Strict improvement only, so the earliest run wins ties.
    if (run_trace.wcss.back() < best_wcss) {
      best_wcss = run_trace.wcss.back();
      best = std::move(centers);
      if (trace) *trace = std::move(run_trace);
    }
  }
  if (trace) trace->restarts = std::move(all_runs);
  return model_from_centers(std::move(best));
}


ClusterModel model_from_centers(std::vector<Feature> centers) {
  const int k = static_cast<int>(centers.size());
  ClusterModel model;
  model.k = k;
  model.centers = std::move(centers);
  model.order.resize(k);
  std::iota(model.order.begin(), model.order.end(), 0);
  const auto& c = model.centers;
  std::stable_sort(model.order.begin(), model.order.end(), [&](int a, int b) { return c[a][0] < c[b][0]; });
  for (int i = 1; i < k; ++i) {
    if (!(c[model.order[i - 1]][0] < c[model.order[i]][0])) {
      throw degenerate_error("cluster intensity centers tie; cannot order clusters");
    }
  }
  if (k >= 3) {
    model.intensity_centers = {c[model.order[0]][0], c[model.order[1]][0], c[model.order[k - 1]][0]};
  }
  return model;
}

LabelMap assign_labels(const ClusterModel& model, const FeatureField& field) {
  if (model.k != 3) throw invalid_error("assign_labels expects a 3-cluster model");
  // Rank order (darkest first) doubles as the tie-break priority.
  const std::array<Label, 3> by_rank = {Label::Cyst, Label::Tissue, Label::Other};
  std::array<std::pair<Label, int>, 3> candidates{};
  for (int r = 0; r < 3; ++r) candidates[r] = {by_rank[r], model.order[r]};

  LabelMap labels(field.width, field.height);
  const auto n = static_cast<std::ptrdiff_t>(field.features.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Feature& f = field.features[i];
    Label best = candidates[0].first;
    double bd = dist2(f, model.centers[candidates[0].second]);
    for (int c = 1; c < 3; ++c) {
      const double d = dist2(f, model.centers[candidates[c].second]);
      if (d < bd) {
        bd = d;
        best = candidates[c].first;
      }
    }
    labels.set(static_cast<std::size_t>(i), best);
  }
  return labels;
}

}  // namespace selfseg
