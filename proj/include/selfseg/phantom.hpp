#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "selfseg/dataset.hpp"

namespace selfseg {

struct PhantomConfig {
  int width = 96;
  int height = 96;
  int cyst_count_min = 4;
  int cyst_count_max = 8;
  int cyst_radius_min = 2;
  int cyst_radius_max = 5;
  double tissue_level = 0.35;
  double cyst_level = 0.10;
  double outside_level = 0.80;
  double noise_sigma = 0.03;
  double texture_amplitude = 0.04;
  std::uint64_t seed = 0;

  // Throws a config error on violated invariants, including radii that cannot
  // fit inside the lung ellipses.
  void validate() const;
};

enum class Severity { Mild, Moderate, Severe };

PhantomConfig preset(Severity severity);
Severity parse_severity(const std::string& name);

// Applies `key = value` pairs (as read from a preset file) on top of `base`.
// Unknown keys are rejected.
PhantomConfig apply_phantom_settings(PhantomConfig base, const std::map<std::string, std::string>& settings);

struct Phantom {
  Image image;
  LabelMap ground_truth;
  LungMask lung;
};

// Two axis-aligned lung ellipses, elliptical cysts fully inside the lung,
// region base levels plus a low-frequency sinusoidal texture plus Gaussian
// noise, clamped to [0,1]. Pure function of the config.
Phantom generate_phantom(const PhantomConfig& config);

// Writes {train,test}_NNN{,_mask,_gt}.pgm and manifest.txt into out_dir; item i
// uses seed config.seed + i.
Manifest generate_set(const PhantomConfig& config, int n_train, int n_test, const std::filesystem::path& out_dir);

}  // namespace selfseg
