#include "selfseg/run_config.hpp"

#include <cstdlib>

#include "selfseg/config.hpp"
#include "selfseg/error.hpp"

namespace selfseg {

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SELFSEG_SEED");
  if (!v || !*v) return std::nullopt;
  return parse_u64("SELFSEG_SEED", v);
}

RunConfig make_run_config(const std::map<std::string, std::string>& settings,
                          std::optional<std::uint64_t> seed_override) {
  RunConfig rc;
  auto& c = rc.selftrain;

  std::optional<std::uint64_t> base = seed_override;
  if (!base) {
    if (auto it = settings.find("seed"); it != settings.end()) base = parse_u64(it->first, it->second);
  }
  if (!base) base = env_seed();
  rc.base_seed = base.value_or(0);
  c.kmeans.seed = rc.base_seed;
  c.net.seed = rc.base_seed + 1;
  c.level1_train.seed = rc.base_seed + 2;

  for (const auto& [key, value] : settings) {
    if (key == "seed") continue;
    else if (key == "max_levels") c.max_levels = parse_int(key, value);
    else if (key == "similarity_threshold") c.similarity_threshold = parse_double(key, value);
    else if (key == "lr_decay") c.lr_decay = parse_double(key, value);
    else if (key == "learning_rate") c.level1_train.learning_rate = parse_double(key, value);
    else if (key == "momentum") c.level1_train.momentum = parse_double(key, value);
    else if (key == "iterations") c.level1_train.iterations = parse_int(key, value);
    else if (key == "skip_empty") c.level1_train.skip_empty = parse_bool(key, value);
    else if (key == "train_seed") c.level1_train.seed = parse_u64(key, value);
    else if (key == "window_radius") c.window_radius = parse_int(key, value);
    else if (key == "kmeans_seed") c.kmeans.seed = parse_u64(key, value);
    else if (key == "kmeans_max_iter") c.kmeans.max_iter = parse_int(key, value);
    else if (key == "kmeans_tol") c.kmeans.tol = parse_double(key, value);
    else if (key == "kmeans_restarts") c.kmeans.restarts = parse_int(key, value);
    else if (key == "delta") c.energy.delta = parse_double(key, value);
    else if (key == "pairwise_mode") {
      if (value == "potts_labels") c.energy.pairwise_mode = PairwiseMode::PottsLabels;
      else if (value == "literal_values") c.energy.pairwise_mode = PairwiseMode::LiteralValues;
      else throw config_error("pairwise_mode must be potts_labels or literal_values");
    }
    else if (key == "max_sweeps") c.max_sweeps = parse_int(key, value);
    else if (key == "depth") c.net.depth = parse_int(key, value);
    else if (key == "base_channels") c.net.base_channels = parse_int(key, value);
    else if (key == "net_seed") c.net.seed = parse_u64(key, value);
    else if (key == "jobs") c.jobs = parse_int(key, value);
    else throw config_error("unknown config key '" + key + "'");
  }
  c.validate();
  return rc;
}

}  // namespace selfseg
