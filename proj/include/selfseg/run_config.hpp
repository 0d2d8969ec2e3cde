#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "selfseg/selftrain.hpp"

namespace selfseg {

// Every stage config of a self-training run. Built from `key = value`
// settings; unknown keys are rejected.
//
// Seeds: `seed` is the base seed (falling back to $SELFSEG_SEED, then 0).
// Stage seeds default to base (k-means), base + 1 (network init) and
// base + 2 (sampling) unless set explicitly with kmeans_seed, net_seed or
// train_seed.
struct RunConfig {
  SelfTrainConfig selftrain;
  std::uint64_t base_seed = 0;
};

RunConfig make_run_config(const std::map<std::string, std::string>& settings,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

// Base seed from $SELFSEG_SEED if set; a malformed value is a config error.
std::optional<std::uint64_t> env_seed();

}  // namespace selfseg
