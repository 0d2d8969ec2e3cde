#include "selfseg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "selfseg/config.hpp"
#include "selfseg/error.hpp"
#include "selfseg/metrics.hpp"
#include "selfseg/phantom.hpp"
#include "selfseg/run_config.hpp"
#include "selfseg/selftrain.hpp"
#include "selfseg/student.hpp"

namespace fs = std::filesystem;

namespace selfseg::cli {

namespace {

// CLI11 consumes argument vectors back to front.
bool parse(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int& code) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    return true;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    code = kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    code = kUsage;
  }
  return false;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::Config:
    case Error::Kind::Manifest:
    case Error::Kind::Format:
    case Error::Kind::Shape:
      return kUsage;
    case Error::Kind::Divergence:
      return kDiverged;
    default:
      return kRuntime;
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int cmd_phantom_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generate a synthetic lung phantom dataset", "selfseg phantom-gen"};
  std::string out_dir, preset_name = "moderate", config_path;
  int n_train = 0, n_test = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--train", n_train, "Number of train images")->required();
  app.add_option("--test", n_test, "Number of test images")->required();
  app.add_option("--preset", preset_name, "mild, moderate or severe")->check(CLI::IsMember({"mild", "moderate", "severe"}));
  app.add_option("--seed", seed, "Base seed (falls back to SELFSEG_SEED)");
  app.add_option("--config", config_path, "key = value phantom settings applied over the preset");
  int code = kOk;
  if (!parse(app, args, out, err, code)) return code;

  return guarded(err, [&] {
    PhantomConfig config = preset(parse_severity(preset_name));
    if (!config_path.empty()) config = apply_phantom_settings(config, load_key_values(config_path));
    if (seed) {
      config.seed = *seed;
    } else if (config_path.empty() || !load_key_values(config_path).contains("seed")) {
      if (auto env = env_seed()) config.seed = *env;
    }
    if (n_train < 1) throw config_error("--train must be >= 1");
    if (n_test < 0) throw config_error("--test must be >= 0");
    const Manifest m = generate_set(config, n_train, n_test, out_dir);
    out << "wrote " << m.entries.size() << " phantoms and " << (fs::path(out_dir) / "manifest.txt").string() << "\n";
    return int{kOk};
  });
}

int cmd_selftrain(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Run recursive self-training from SK-GC seed labels", "selfseg selftrain"};
  std::string manifest_path, out_dir, config_path;
  std::optional<int> max_levels, jobs;
  std::optional<std::uint64_t> seed;
  app.add_option("--manifest", manifest_path, "Dataset manifest")->required();
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--config", config_path, "key = value run settings");
  app.add_option("--max-levels", max_levels, "Override max_levels");
  app.add_option("--jobs", jobs, "Worker threads for per-image stages");
  app.add_option("--seed", seed, "Override the base seed");
  int code = kOk;
  if (!parse(app, args, out, err, code)) return code;
  if (!fs::is_regular_file(manifest_path)) {
    err << "error: manifest not found: " << manifest_path << "\n";
    return kUsage;
  }

  return guarded(err, [&] {
    auto settings = config_path.empty() ? std::map<std::string, std::string>{} : load_key_values(config_path);
    if (max_levels) settings["max_levels"] = std::to_string(*max_levels);
    if (jobs) settings["jobs"] = std::to_string(*jobs);
    const RunConfig rc = make_run_config(settings, seed);
    const Manifest manifest = load_manifest(manifest_path);
    const auto data = load_dataset(manifest);
    const SelfTrainResult result = run_selftrain(data, rc.selftrain);
    write_selftrain_outputs(result, out_dir);
    for (const auto& r : result.reports) {
      char line[256];
      std::snprintf(line, sizeof line, "level %d: similarity %s, test dice %.4f, test adcs %.4f, %.1f s\n", r.level,
                    r.similarity_to_previous ? format_number(*r.similarity_to_previous).c_str() : "-",
                    r.mean_test_dice(), r.mean_test_adcs(), r.wall_seconds);
      out << line;
    }
    return int{kOk};
  });
}

int cmd_predict(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segment one slice with a trained checkpoint", "selfseg predict"};
  std::string params_path, image_path, mask_path, out_path;
  app.add_option("--params", params_path, "Checkpoint (params.bin)")->required();
  app.add_option("--image", image_path, "Input PGM")->required();
  app.add_option("--mask", mask_path, "Lung mask PGM")->required();
  app.add_option("--out", out_path, "Output label PGM")->required();
  int code = kOk;
  if (!parse(app, args, out, err, code)) return code;

  return guarded(err, [&] {
    const StudentParams params = load_params(params_path);
    const Image image = load_image(image_path);
    const LungMask mask = load_mask(mask_path);
    if (mask.width() != image.width() || mask.height() != image.height()) {
      throw shape_error("mask and image dimensions differ");
    }
    const auto start = std::chrono::steady_clock::now();
    const LabelMap labels = predict(params, image, mask);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_labelmap(labels, out_path);
    char line[128];
    std::snprintf(line, sizeof line, "predicted %s in %.4f s\n", image_path.c_str(), seconds);
    out << line;
    return int{kOk};
  });
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluate predictions against ground truth", "selfseg eval"};
  std::string manifest_path, pred_dir, out_path;
  app.add_option("--manifest", manifest_path, "Dataset manifest")->required();
  app.add_option("--pred-dir", pred_dir, "Directory holding <image>.pgm predictions")->required();
  app.add_option("--out", out_path, "Output CSV")->required();
  int code = kOk;
  if (!parse(app, args, out, err, code)) return code;

  return guarded(err, [&] {
    const Manifest manifest = load_manifest(manifest_path);
    std::map<std::string, LabelMap> preds;
    std::vector<std::string> missing;
    for (const auto* e : manifest.split(Split::Test)) {
      const std::string key = image_key(*e);
      const fs::path p = fs::path(pred_dir) / (key + ".pgm");
      if (!fs::is_regular_file(p)) {
        missing.push_back(key);
        continue;
      }
      preds.emplace(key, load_labelmap(p));
    }
    if (!missing.empty()) {
      err << "error: missing predictions:";
      for (const auto& m : missing) err << ' ' << m;
      err << "\n";
      return int{kRuntime};
    }
    const EvalReport report = evaluate(manifest, preds);
    for (const auto& s : report.skipped) err << "warning: " << s << " has no ground truth or mask; skipped\n";
    std::ofstream csv(out_path);
    if (!csv) throw io_error("cannot write " + out_path);
    write_eval_csv(report, csv);
    if (!csv) throw io_error("write failed for " + out_path);
    out << "evaluated " << report.rows.size() << " images, mean dice " << format_number(report.mean_dice())
        << ", mean adcs " << format_number(report.mean_adcs()) << "\n";
    return int{kOk};
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const char* usage =
      "usage: selfseg <verb> [flags]\n"
      "verbs:\n"
      "  phantom-gen  --out DIR --train N --test M [--preset mild|moderate|severe] [--seed S] [--config F]\n"
      "  selftrain    --manifest F --out DIR [--config F] [--max-levels K] [--jobs N] [--seed S]\n"
      "  predict      --params F --image F --mask F --out F\n"
      "  eval         --manifest F --pred-dir D --out F.csv\n";
  if (args.empty()) {
    err << usage;
    return kUsage;
  }
  const std::string verb = args.front();
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (verb == "phantom-gen") return cmd_phantom_gen(rest, out, err);
  if (verb == "selftrain") return cmd_selftrain(rest, out, err);
  if (verb == "predict") return cmd_predict(rest, out, err);
  if (verb == "eval") return cmd_eval(rest, out, err);
  if (verb == "-h" || verb == "--help" || verb == "help") {
    out << usage;
    return kOk;
  }
  err << "unknown verb '" << verb << "'\n" << usage;
  return kUsage;
}

}  // namespace selfseg::cli
