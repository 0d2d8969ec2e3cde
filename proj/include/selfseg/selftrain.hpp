#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selfseg/cluster.hpp"
#include "selfseg/dataset.hpp"
#include "selfseg/graphcut.hpp"
#include "selfseg/metrics.hpp"
#include "selfseg/student.hpp"

namespace selfseg {

struct SelfTrainConfig {
  int max_levels = 3;
  double similarity_threshold = 0.99;
  double lr_decay = 10.0;
  TrainConfig level1_train;
  int window_radius = 2;
  KMeansOptions kmeans;
  EnergyParams energy;
  int max_sweeps = 10;
  NetConfig net;
  // Worker threads for per-image stages; results do not depend on it.
  int jobs = 1;

  void validate() const;
  // Learning rate for level t >= 1: level1 rate / lr_decay^(t-1).
  double learning_rate(int level) const;
};

// One manifest entry loaded into memory.
struct LoadedImage {
  std::string key;
  Split split = Split::Train;
  Image image;
  std::optional<LungMask> mask;
  std::optional<LabelMap> ground_truth;
};

std::vector<LoadedImage> load_dataset(const Manifest& manifest);

struct SeedDiagnostics {
  std::vector<KMeansTrace> kmeans;
  std::vector<ExpansionTrace> expansion;
};

// SK-GC teacher for one image: features, k-means, nearest-center labels,
// graph-cut refinement.
LabelMap sk_gc(const Image& image, const SelfTrainConfig& cfg, KMeansTrace* kmeans_trace = nullptr,
               ExpansionTrace* expansion_trace = nullptr);

std::vector<LabelMap> seed_labels(const std::vector<const Image*>& images, const SelfTrainConfig& cfg,
                                  SeedDiagnostics* diagnostics = nullptr);

// Mean Cyst-class Dice over paired maps (both-empty pairs count 1.0).
double similarity(const std::vector<LabelMap>& a, const std::vector<LabelMap>& b);

struct LevelReport {
  int level = 0;
  // Absent for level 0.
  std::optional<double> similarity_to_previous;
  std::optional<double> learning_rate;
  std::optional<double> loss_start;  // mean of the first 10% of the trace
  std::optional<double> loss_end;    // mean of the last 10% of the trace
  std::vector<EvalRow> test_rows;
  double wall_seconds = 0.0;

  double mean_test_dice() const;
  double mean_test_adcs() const;
};

struct LevelOutput {
  int level = 0;
  std::optional<StudentParams> params;  // none for level 0
  std::vector<LabelMap> train_labels;   // in train order
  std::vector<LabelMap> test_labels;    // in test order
};

struct SelfTrainResult {
  std::optional<StudentParams> final_params;
  std::vector<LevelReport> reports;  // level 0 (teacher) first
  std::vector<LevelOutput> levels;
  std::vector<std::string> train_keys;
  std::vector<std::string> test_keys;
  SeedDiagnostics seed_diagnostics;
};

// Level 0 = SK-GC labels; level t trains (warm-started from level t-1,
// learning rate decayed) on level t-1 train labels, then re-labels the train
// set. Stops when similarity to the previous labels reaches the threshold or
// after max_levels. Divergence errors name the failing level.
SelfTrainResult run_selftrain(const std::vector<LoadedImage>& data, const SelfTrainConfig& cfg);

// level{t}/params.bin (t >= 1), level{t}/labels/<key>.pgm, report.csv.
void write_selftrain_outputs(const SelfTrainResult& result, const std::filesystem::path& out_dir);

// Header `level,image,similarity,learning_rate,loss_start,loss_end,dice,score_pred,score_gt,adcs`.
// Each level has a summary row with image `mean` followed by its per-test-image
// rows. Wall time is left out so reruns are byte-identical.
void write_report_csv(const std::vector<LevelReport>& reports, std::ostream& out);

}  // namespace selfseg
