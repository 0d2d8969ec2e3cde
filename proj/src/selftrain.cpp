#include "selfseg/selftrain.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <span>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>

#include "selfseg/error.hpp"

namespace fs = std::filesystem;

namespace selfseg {

namespace {

// Runs body(i) for i in [0, n) over `jobs` threads, rethrowing the first
// failure (lowest index) afterwards.
template <typename F>
void parallel_for_images(std::size_t n, int jobs, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(jobs > 0 ? jobs : 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

void SelfTrainConfig::validate() const {
  if (max_levels < 1) throw config_error("max_levels must be >= 1");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw config_error("similarity_threshold must be in (0, 1]");
  }
  if (!(lr_decay > 0.0)) throw config_error("lr_decay must be > 0");
  level1_train.validate();
  if (window_radius < 1) throw config_error("window_radius must be >= 1");
  if (kmeans.k != 3) throw config_error("the pipeline needs k = 3");
  if (kmeans.max_iter < 1) throw config_error("kmeans_max_iter must be >= 1");
  if (!(kmeans.tol >= 0.0)) throw config_error("kmeans_tol must be >= 0");
  if (kmeans.restarts < 1) throw config_error("kmeans_restarts must be >= 1");
  if (!(energy.delta >= 0.0)) throw config_error("delta must be >= 0");
  if (max_sweeps < 1) throw config_error("max_sweeps must be >= 1");
  net.validate();
  if (jobs < 1) throw config_error("jobs must be >= 1");
}

double SelfTrainConfig::learning_rate(int level) const {
  double lr = level1_train.learning_rate;
  for (int t = 1; t < level; ++t) lr /= lr_decay;
  return lr;
}

std::vector<LoadedImage> load_dataset(const Manifest& manifest) {
  std::vector<LoadedImage> data;
  std::vector<std::string> keys;
  for (const auto& e : manifest.entries) {
    LoadedImage item;
    item.key = image_key(e);
    if (std::find(keys.begin(), keys.end(), item.key) != keys.end()) {
      throw manifest_error("two manifest images share the output name '" + item.key + "'");
    }
    keys.push_back(item.key);
    item.split = e.split;
    item.image = load_image(e.image);
    if (e.mask) item.mask = load_mask(*e.mask);
    if (e.ground_truth) item.ground_truth = load_labelmap(*e.ground_truth);
    auto same = [&](int w, int h) { return w == item.image.width() && h == item.image.height(); };
    if ((item.mask && !same(item.mask->width(), item.mask->height())) ||
        (item.ground_truth && !same(item.ground_truth->width(), item.ground_truth->height()))) {
      throw dimension_error(item.key + ": mask or ground truth does not match image dimensions");
    }
    data.push_back(std::move(item));
  }
  return data;
}

LabelMap sk_gc(const Image& image, const SelfTrainConfig& cfg, KMeansTrace* kmeans_trace,
               ExpansionTrace* expansion_trace) {
  const FeatureField field = extract_features(image, cfg.window_radius);
  const ClusterModel model = kmeans_fit(field, cfg.kmeans, kmeans_trace);
  const LabelMap initial = assign_labels(model, field);
  return refine(image, initial, model.intensity_centers, cfg.energy, cfg.max_sweeps, expansion_trace);
}

std::vector<LabelMap> seed_labels(const std::vector<const Image*>& images, const SelfTrainConfig& cfg,
                                  SeedDiagnostics* diagnostics) {
  std::vector<LabelMap> labels(images.size());
  std::vector<KMeansTrace> kt(images.size());
  std::vector<ExpansionTrace> et(images.size());
  parallel_for_images(images.size(), cfg.jobs,
                      [&](std::size_t i) { labels[i] = sk_gc(*images[i], cfg, &kt[i], &et[i]); });
  if (diagnostics) {
    diagnostics->kmeans.insert(diagnostics->kmeans.end(), kt.begin(), kt.end());
    diagnostics->expansion.insert(diagnostics->expansion.end(), et.begin(), et.end());
  }
  return labels;
}

double similarity(const std::vector<LabelMap>& a, const std::vector<LabelMap>& b) {
  if (a.size() != b.size()) throw invalid_error("similarity: label sets differ in length");
  if (a.empty()) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += dice(a[i], b[i], Label::Cyst);
  return sum / static_cast<double>(a.size());
}

double LevelReport::mean_test_dice() const {
  double s = 0.0;
  for (const auto& r : test_rows) s += r.dice;
  return test_rows.empty() ? 0.0 : s / static_cast<double>(test_rows.size());
}

double LevelReport::mean_test_adcs() const {
  double s = 0.0;
  for (const auto& r : test_rows) s += r.adcs;
  return test_rows.empty() ? 0.0 : s / static_cast<double>(test_rows.size());
}

SelfTrainResult run_selftrain(const std::vector<LoadedImage>& data, const SelfTrainConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  SelfTrainResult result;

  std::vector<const LoadedImage*> train_set, test_set;
  for (const auto& d : data) (d.split == Split::Train ? train_set : test_set).push_back(&d);
  if (train_set.empty()) throw manifest_error("self-training needs at least one train image");
  for (const auto* d : train_set) result.train_keys.push_back(d->key);
  for (const auto* d : test_set) result.test_keys.push_back(d->key);

  auto images_of = [](const std::vector<const LoadedImage*>& set) {
    std::vector<const Image*> out;
    for (const auto* d : set) out.push_back(&d->image);
    return out;
  };

  auto evaluate_test = [&](const std::vector<LabelMap>& preds) {
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      if (!test_set[i]->ground_truth || !test_set[i]->mask) continue;
      const double sp = cyst_score(preds[i], *test_set[i]->mask);
      const double sg = cyst_score(*test_set[i]->ground_truth, *test_set[i]->mask);
      rows.push_back({test_set[i]->key, dice(preds[i], *test_set[i]->ground_truth), sp, sg, std::abs(sp - sg)});
    }
    return rows;
  };

  // Level 0: SK-GC teacher on both splits.
  auto start = clock::now();
  LevelOutput level0;
  level0.train_labels = seed_labels(images_of(train_set), cfg, &result.seed_diagnostics);
  level0.test_labels = seed_labels(images_of(test_set), cfg, &result.seed_diagnostics);
  LevelReport report0;
  report0.test_rows = evaluate_test(level0.test_labels);
  report0.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  result.reports.push_back(report0);

  // Prediction domain per image, frozen for all levels.
  auto domain = [](const LoadedImage& d, const LabelMap& seed) { return d.mask ? *d.mask : mask_from_labels(seed); };
  std::vector<LungMask> train_masks, test_masks;
  for (std::size_t i = 0; i < train_set.size(); ++i) train_masks.push_back(domain(*train_set[i], level0.train_labels[i]));
  for (std::size_t i = 0; i < test_set.size(); ++i) test_masks.push_back(domain(*test_set[i], level0.test_labels[i]));
  result.levels.push_back(std::move(level0));

  StudentParams params = init_params(cfg.net);
  for (int level = 1; level <= cfg.max_levels; ++level) {
    start = clock::now();
    const std::vector<LabelMap>& teacher = result.levels.back().train_labels;
    std::vector<TrainingSample> samples;
    for (std::size_t i = 0; i < train_set.size(); ++i) samples.push_back({&train_set[i]->image, &teacher[i]});

    TrainConfig tc = cfg.level1_train;
    tc.learning_rate = cfg.learning_rate(level);
    tc.seed = cfg.level1_train.seed + static_cast<std::uint64_t>(level - 1);
    TrainResult trained;
    try {
      trained = train(params, samples, tc);
    } catch (const Error& e) {
      if (e.kind() == Error::Kind::Divergence) {
        throw divergence_error("level " + std::to_string(level) + " diverged: " + e.what());
      }
      throw;
    }
    params = std::move(trained.params);

    LevelOutput out;
    out.level = level;
    out.params = params;
    out.train_labels.resize(train_set.size());
    out.test_labels.resize(test_set.size());
    parallel_for_images(train_set.size(), cfg.jobs, [&](std::size_t i) {
      out.train_labels[i] = predict(params, train_set[i]->image, train_masks[i]);
    });
    parallel_for_images(test_set.size(), cfg.jobs, [&](std::size_t i) {
      out.test_labels[i] = predict(params, test_set[i]->image, test_masks[i]);
    });

    LevelReport report;
    report.level = level;
    report.similarity_to_previous = similarity(out.train_labels, teacher);
    report.learning_rate = tc.learning_rate;
    const auto& trace = trained.loss_trace;
    if (!trace.empty()) {
      const std::size_t window = std::max<std::size_t>(1, trace.size() / 10);
      report.loss_start = mean_of(std::span<const double>(trace).first(window));
      report.loss_end = mean_of(std::span<const double>(trace).last(window));
    }
    report.test_rows = evaluate_test(out.test_labels);
    report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.reports.push_back(report);
    result.levels.push_back(std::move(out));

    if (*report.similarity_to_previous >= cfg.similarity_threshold) break;
  }
  result.final_params = params;
  return result;
}

void write_report_csv(const std::vector<LevelReport>& reports, std::ostream& out) {
  out << "level,image,similarity,learning_rate,loss_start,loss_end,dice,score_pred,score_gt,adcs\n";
  for (const auto& r : reports) {
    EvalReport eval{r.test_rows, {}};
    const EvalRow m = eval.mean_row();
    char lr[64] = "";
    if (r.learning_rate) std::snprintf(lr, sizeof lr, "%.6g", *r.learning_rate);
    out << r.level << ",mean," << optional_number(r.similarity_to_previous) << ',' << lr << ','
        << optional_number(r.loss_start) << ',' << optional_number(r.loss_end) << ',' << format_number(m.dice) << ','
        << format_number(m.score_pred) << ',' << format_number(m.score_gt) << ',' << format_number(m.adcs) << '\n';
    for (const auto& row : r.test_rows) {
      out << r.level << ',' << row.image << ",,,,," << format_number(row.dice) << ',' << format_number(row.score_pred)
          << ',' << format_number(row.score_gt) << ',' << format_number(row.adcs) << '\n';
    }
  }
}

void write_selftrain_outputs(const SelfTrainResult& result, const fs::path& out_dir) {
  for (const auto& level : result.levels) {
    const fs::path dir = out_dir / ("level" + std::to_string(level.level));
    std::error_code ec;
    fs::create_directories(dir / "labels", ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    if (level.params) save_params(*level.params, dir / "params.bin");
    for (std::size_t i = 0; i < level.train_labels.size(); ++i) {
      save_labelmap(level.train_labels[i], dir / "labels" / (result.train_keys[i] + ".pgm"));
    }
    for (std::size_t i = 0; i < level.test_labels.size(); ++i) {
      save_labelmap(level.test_labels[i], dir / "labels" / (result.test_keys[i] + ".pgm"));
    }
  }
  std::ofstream csv(out_dir / "report.csv");
  if (!csv) throw io_error("cannot write report.csv");
  write_report_csv(result.reports, csv);
}

}  // namespace selfseg
