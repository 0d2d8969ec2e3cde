#include "selfseg/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "selfseg/config.hpp"
#include "selfseg/error.hpp"
#include "selfseg/random.hpp"

namespace fs = std::filesystem;

namespace selfseg {

namespace {

struct Ellipse {
  double cx, cy, rx, ry;

  bool contains(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

// Lungs as fixed fractions of the frame.
std::array<Ellipse, 2> lung_ellipses(int width, int height) {
  const double rx = 0.17 * width;
  const double ry = 0.36 * height;
  const double cy = 0.5 * (height - 1);
  return {Ellipse{0.29 * (width - 1), cy, rx, ry}, Ellipse{0.71 * (width - 1), cy, rx, ry}};
}

}  // namespace

void PhantomConfig::validate() const {
  if (width < kMinImageSide || height < kMinImageSide) throw config_error("phantom dimensions below minimum");
  if (!(0.0 <= cyst_level && cyst_level < tissue_level && tissue_level < outside_level && outside_level <= 1.0)) {
    throw config_error("phantom levels must satisfy 0 <= cyst < tissue < outside <= 1");
  }
  if (!(noise_sigma >= 0.0)) throw config_error("noise_sigma must be >= 0");
  if (!(texture_amplitude >= 0.0)) throw config_error("texture_amplitude must be >= 0");
  if (cyst_count_min < 0 || cyst_count_max < cyst_count_min) throw config_error("bad cyst_count range");
  if (cyst_radius_min < 1 || cyst_radius_max < cyst_radius_min) throw config_error("bad cyst_radius range");
  const auto lungs = lung_ellipses(width, height);
  // A cyst needs 2r+1 pixels across the narrower lung axis with a pixel to spare.
  const double extent = 2.0 * std::min(lungs[0].rx, lungs[0].ry);
  if (2.0 * cyst_radius_max + 2.0 > extent) {
    throw config_error("cyst_radius_max " + std::to_string(cyst_radius_max) + " exceeds lung extent");
  }
}

PhantomConfig preset(Severity severity) {
  PhantomConfig c;
  switch (severity) {
    case Severity::Mild:
      c.cyst_count_min = 1;
      c.cyst_count_max = 3;
      c.cyst_radius_min = 2;
      c.cyst_radius_max = 4;
      break;
    case Severity::Moderate:
      c.cyst_count_min = 4;
      c.cyst_count_max = 8;
      c.cyst_radius_min = 2;
      c.cyst_radius_max = 5;
      break;
    case Severity::Severe:
      c.cyst_count_min = 9;
      c.cyst_count_max = 15;
      c.cyst_radius_min = 2;
      c.cyst_radius_max = 6;
      break;
  }
  return c;
}

Severity parse_severity(const std::string& name) {
  if (name == "mild") return Severity::Mild;
  if (name == "moderate") return Severity::Moderate;
  if (name == "severe") return Severity::Severe;
  throw config_error("unknown preset '" + name + "' (expected mild, moderate or severe)");
}

PhantomConfig apply_phantom_settings(PhantomConfig c, const std::map<std::string, std::string>& settings) {
  for (const auto& [key, value] : settings) {
    if (key == "width") c.width = parse_int(key, value);
    else if (key == "height") c.height = parse_int(key, value);
    else if (key == "cyst_count_min") c.cyst_count_min = parse_int(key, value);
    else if (key == "cyst_count_max") c.cyst_count_max = parse_int(key, value);
    else if (key == "cyst_radius_min") c.cyst_radius_min = parse_int(key, value);
    else if (key == "cyst_radius_max") c.cyst_radius_max = parse_int(key, value);
    else if (key == "tissue_level") c.tissue_level = parse_double(key, value);
    else if (key == "cyst_level") c.cyst_level = parse_double(key, value);
    else if (key == "outside_level") c.outside_level = parse_double(key, value);
    else if (key == "noise_sigma") c.noise_sigma = parse_double(key, value);
    else if (key == "texture_amplitude") c.texture_amplitude = parse_double(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else throw config_error("unknown phantom key '" + key + "'");
  }
  return c;
}

Phantom generate_phantom(const PhantomConfig& config) {
  config.validate();
  const int w = config.width;
  const int h = config.height;
  Rng rng(config.seed);

  const auto lungs = lung_ellipses(w, h);
  LungMask lung(w, h);
  LabelMap gt(w, h, Label::Other);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (lungs[0].contains(x, y) || lungs[1].contains(x, y)) {
        lung.set(x, y, true);
        gt.set(x, y, Label::Tissue);
      }
    }
  }

  const int cysts = rng.between(config.cyst_count_min, config.cyst_count_max);
  for (int k = 0; k < cysts; ++k) {
    const double rx = rng.between(config.cyst_radius_min, config.cyst_radius_max);
    const double ry = rng.between(config.cyst_radius_min, config.cyst_radius_max);
    const Ellipse& host = lungs[rng.below(2)];
    // Rejection sample a center whose whole cyst footprint stays in the lung.
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const Ellipse cyst{std::round(rng.uniform(host.cx - host.rx, host.cx + host.rx)),
                         std::round(rng.uniform(host.cy - host.ry, host.cy + host.ry)), rx, ry};
      const int x0 = static_cast<int>(cyst.cx - rx), x1 = static_cast<int>(cyst.cx + rx);
      const int y0 = static_cast<int>(cyst.cy - ry), y1 = static_cast<int>(cyst.cy + ry);
      if (x0 < 0 || y0 < 0 || x1 >= w || y1 >= h) continue;
      bool inside = true;
      for (int y = y0; y <= y1 && inside; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (cyst.contains(x, y) && !lung.at(x, y)) {
            inside = false;
            break;
          }
        }
      }
      if (!inside) continue;
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (cyst.contains(x, y)) gt.set(x, y, Label::Cyst);
        }
      }
      placed = true;
    }
    if (!placed) throw config_error("could not place a cyst inside the lung; radius range too large");
  }

  // Low-frequency texture: product of two sinusoids, 1 to 3 cycles per frame.
  const double fx = rng.uniform(1.0, 3.0);
  const double fy = rng.uniform(1.0, 3.0);
  const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Image image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double base = config.outside_level;
      switch (gt.at(x, y)) {
        case Label::Cyst: base = config.cyst_level; break;
        case Label::Tissue: base = config.tissue_level; break;
        default: break;
      }
      double v = base;
      if (config.texture_amplitude > 0.0) {
        v += config.texture_amplitude * std::sin(2.0 * std::numbers::pi * fx * x / w + phase_x) *
             std::sin(2.0 * std::numbers::pi * fy * y / h + phase_y);
      }
      if (config.noise_sigma > 0.0) v += config.noise_sigma * rng.normal();
      image(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return {std::move(image), std::move(gt), std::move(lung)};
}

Manifest generate_set(const PhantomConfig& config, int n_train, int n_test, const fs::path& out_dir) {
  if (n_train < 1) throw manifest_error("phantom set needs at least one train image");
  if (n_test < 0) throw manifest_error("negative test count");
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());

  Manifest relative;
  Manifest resolved;
  for (int i = 0; i < n_train + n_test; ++i) {
    const bool train = i < n_train;
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s_%03d", train ? "train" : "test", train ? i : i - n_train);
    PhantomConfig item = config;
    item.seed = config.seed + static_cast<std::uint64_t>(i);
    const Phantom p = generate_phantom(item);
    const std::string s(stem);
    save_image(p.image, out_dir / (s + ".pgm"));
    save_mask(p.lung, out_dir / (s + "_mask.pgm"));
    save_labelmap(p.ground_truth, out_dir / (s + "_gt.pgm"));

    ManifestEntry e{train ? Split::Train : Split::Test, s + ".pgm", s + "_mask.pgm", s + "_gt.pgm"};
    relative.entries.push_back(e);
    resolved.entries.push_back({e.split, out_dir / e.image, out_dir / *e.mask, out_dir / *e.ground_truth});
  }
  save_manifest(relative, out_dir / "manifest.txt");
  return resolved;
}

}  // namespace selfseg
