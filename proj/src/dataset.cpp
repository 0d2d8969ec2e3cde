#include "selfseg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "selfseg/error.hpp"

namespace fs = std::filesystem;

namespace selfseg {

namespace {

void check_dimensions(int width, int height) {
  if (width < kMinImageSide || height < kMinImageSide) {
    throw dimension_error("image dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                          " below minimum side " + std::to_string(kMinImageSide));
  }
}

void check_payload(std::size_t got, int width, int height, const char* what) {
  if (got != static_cast<std::size_t>(width) * height) {
    throw dimension_error(std::string(what) + " payload length does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

// Reads one header token, skipping whitespace and `#` comments.
std::string header_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) return token;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token;
}

int header_int(std::istream& in, const fs::path& path, const char* field) {
  const std::string token = header_token(in);
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char ch) { return std::isdigit(ch); }) ||
      token.size() > 9) {
    throw format_error(path.string() + ": bad PGM " + field + " '" + token + "'");
  }
  return std::stoi(token);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool is_valid_label_code(std::uint8_t code) noexcept { return code == 0 || code == 1 || code == 2 || code == 255; }

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  check_dimensions(width, height);
  if (fill < 0.0 || fill > 1.0) throw invalid_error("image fill value outside [0,1]");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<double> intensities)
    : width_(width), height_(height), values_(std::move(intensities)) {
  check_dimensions(width, height);
  check_payload(values_.size(), width, height, "image");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw invalid_error("image intensity outside [0,1]");
  }
}

LabelMap::LabelMap(int width, int height, Label fill) : width_(width), height_(height) {
  check_dimensions(width, height);
  codes_.assign(static_cast<std::size_t>(width) * height, static_cast<std::uint8_t>(fill));
}

LabelMap::LabelMap(int width, int height, std::vector<std::uint8_t> codes)
    : width_(width), height_(height), codes_(std::move(codes)) {
  check_dimensions(width, height);
  check_payload(codes_.size(), width, height, "label map");
  for (auto c : codes_) {
    if (!is_valid_label_code(c)) throw invalid_error("label code " + std::to_string(c) + " is not one of 0,1,2,255");
  }
}

std::size_t LabelMap::count(Label l) const {
  return static_cast<std::size_t>(std::count(codes_.begin(), codes_.end(), static_cast<std::uint8_t>(l)));
}

LungMask::LungMask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dimensions(width, height);
  inside_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

LungMask::LungMask(int width, int height, std::vector<std::uint8_t> inside)
    : width_(width), height_(height), inside_(std::move(inside)) {
  check_dimensions(width, height);
  check_payload(inside_.size(), width, height, "mask");
  for (auto& v : inside_) v = v ? 1 : 0;
}

std::size_t LungMask::count() const {
  return static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), std::uint8_t{1}));
}

LungMask mask_from_labels(const LabelMap& labels) {
  LungMask mask(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mask.set(i, labels[i] == Label::Cyst || labels[i] == Label::Tissue);
  }
  return mask;
}

std::vector<const ManifestEntry*> Manifest::split(Split which) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == which) out.push_back(&e);
  }
  return out;
}

std::string image_key(const ManifestEntry& entry) { return entry.image.stem().string(); }

PgmData read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  if (header_token(in) != "P5") throw format_error(path.string() + ": not a binary PGM (P5)");
  PgmData pgm;
  pgm.width = header_int(in, path, "width");
  pgm.height = header_int(in, path, "height");
  pgm.maxval = header_int(in, path, "maxval");
  if (pgm.maxval < 1 || pgm.maxval > 65535) throw format_error(path.string() + ": PGM maxval out of range");
  check_dimensions(pgm.width, pgm.height);

  // header_token consumed exactly one whitespace byte after maxval.
  const std::size_t n = static_cast<std::size_t>(pgm.width) * pgm.height;
  const std::size_t bytes_per_sample = pgm.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw format_error(path.string() + ": truncated PGM payload");

  pgm.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = bytes_per_sample == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                                                  : static_cast<std::uint16_t>(raw[i]);
    if (v > pgm.maxval) throw format_error(path.string() + ": sample exceeds maxval");
    pgm.samples[i] = v;
  }
  return pgm;
}

void write_pgm(const PgmData& pgm, const fs::path& path) {
  check_dimensions(pgm.width, pgm.height);
  check_payload(pgm.samples.size(), pgm.width, pgm.height, "PGM");
  if (pgm.maxval < 1 || pgm.maxval > 65535) throw format_error("PGM maxval out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << "P5\n" << pgm.width << ' ' << pgm.height << '\n' << pgm.maxval << '\n';
  const bool wide = pgm.maxval > 255;
  std::vector<unsigned char> raw;
  raw.reserve(pgm.samples.size() * (wide ? 2 : 1));
  for (auto v : pgm.samples) {
    if (wide) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw io_error("write failed for " + path.string());
}

Image load_image(const fs::path& path) {
  const PgmData pgm = read_pgm(path);
  std::vector<double> values(pgm.samples.size());
  const double maxval = pgm.maxval;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = pgm.samples[i] / maxval;
  return Image(pgm.width, pgm.height, std::move(values));
}

void save_image(const Image& image, const fs::path& path) {
  PgmData pgm{image.width(), image.height(), 65535, {}};
  pgm.samples.reserve(image.size());
  for (double v : image.values()) pgm.samples.push_back(static_cast<std::uint16_t>(std::lround(v * 65535.0)));
  write_pgm(pgm, path);
}

LabelMap load_labelmap(const fs::path& path) {
  const PgmData pgm = read_pgm(path);
  if (pgm.maxval > 255) throw format_error(path.string() + ": label maps must be 8-bit");
  std::vector<std::uint8_t> codes(pgm.samples.begin(), pgm.samples.end());
  try {
    return LabelMap(pgm.width, pgm.height, std::move(codes));
  } catch (const Error& e) {
    throw format_error(path.string() + ": " + e.what());
  }
}

void save_labelmap(const LabelMap& map, const fs::path& path) {
  for (auto c : map.codes()) {
    if (!is_valid_label_code(c)) throw invalid_error("refusing to write invalid label code " + std::to_string(c));
  }
  PgmData pgm{map.width(), map.height(), 255, {}};
  pgm.samples.assign(map.codes().begin(), map.codes().end());
  write_pgm(pgm, path);
}

LungMask load_mask(const fs::path& path) {
  const PgmData pgm = read_pgm(path);
  std::vector<std::uint8_t> inside(pgm.samples.size());
  for (std::size_t i = 0; i < inside.size(); ++i) inside[i] = pgm.samples[i] != 0;
  return LungMask(pgm.width, pgm.height, std::move(inside));
}

void save_mask(const LungMask& mask, const fs::path& path) {
  PgmData pgm{mask.width(), mask.height(), 255, {}};
  pgm.samples.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) pgm.samples[i] = mask[i] ? 255 : 0;
  write_pgm(pgm, path);
}

Manifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  Manifest manifest;
  std::set<fs::path> seen;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  while (std::getline(lines, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    const std::string where = "manifest line " + std::to_string(lineno);
    if (fields.size() < 2 || fields.size() > 4) throw manifest_error(where + ": expected 2 to 4 fields");

    ManifestEntry entry;
    if (fields[0] == "train") {
      entry.split = Split::Train;
    } else if (fields[0] == "test") {
      entry.split = Split::Test;
    } else {
      throw manifest_error(where + ": unknown split tag '" + fields[0] + "'");
    }
    if (fields[1].empty()) throw manifest_error(where + ": empty image path");
    entry.image = resolve(fields[1]);
    if (fields.size() > 2 && !fields[2].empty()) entry.mask = resolve(fields[2]);
    if (fields.size() > 3 && !fields[3].empty()) entry.ground_truth = resolve(fields[3]);
    if (!seen.insert(entry.image.lexically_normal()).second) {
      throw manifest_error(where + ": duplicate image path " + fields[1]);
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.split(Split::Train).empty()) throw manifest_error("manifest has no train entries");
  return manifest;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& e : manifest.entries) {
    out << (e.split == Split::Train ? "train" : "test") << ',' << e.image.generic_string();
    if (e.mask || e.ground_truth) out << ',' << (e.mask ? e.mask->generic_string() : "");
    if (e.ground_truth) out << ',' << e.ground_truth->generic_string();
    out << '\n';
  }
  if (!out) throw io_error("write failed for " + path.string());
}

}  // namespace selfseg
