#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace selfseg {

enum class Label : std::uint8_t { Other = 0, Tissue = 1, Cyst = 2, Ignore = 255 };

bool is_valid_label_code(std::uint8_t code) noexcept;

inline constexpr int kMinImageSide = 8;

/// Grayscale slice, intensities normalized to [0,1], row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> intensities);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(int x, int y) const { return values_[index(x, y)]; }
  double& operator()(int x, int y) { return values_[index(x, y)]; }
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, Label fill = Label::Other);
  // Throws if any code is outside {0, 1, 2, 255}.
  LabelMap(int width, int height, std::vector<std::uint8_t> codes);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return codes_.size(); }

  Label operator[](std::size_t i) const { return static_cast<Label>(codes_[i]); }
  Label at(int x, int y) const { return (*this)[static_cast<std::size_t>(y) * width_ + x]; }
  void set(std::size_t i, Label l) { codes_[i] = static_cast<std::uint8_t>(l); }
  void set(int x, int y, Label l) { set(static_cast<std::size_t>(y) * width_ + x, l); }

  std::span<const std::uint8_t> codes() const noexcept { return codes_; }
  std::size_t count(Label l) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> codes_;
};

class LungMask {
 public:
  LungMask() = default;
  LungMask(int width, int height, bool fill = false);
  LungMask(int width, int height, std::vector<std::uint8_t> inside);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return inside_.size(); }

  bool operator[](std::size_t i) const { return inside_[i] != 0; }
  bool at(int x, int y) const { return (*this)[static_cast<std::size_t>(y) * width_ + x]; }
  void set(std::size_t i, bool v) { inside_[i] = v ? 1 : 0; }
  void set(int x, int y, bool v) { set(static_cast<std::size_t>(y) * width_ + x, v); }
  std::size_t count() const;

  friend bool operator==(const LungMask&, const LungMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> inside_;
};

// Mask covering every Cyst or Tissue pixel of a label map.
LungMask mask_from_labels(const LabelMap& labels);

enum class Split { Train, Test };

struct ManifestEntry {
  Split split = Split::Train;
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> ground_truth;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(Split which) const;
};

// Stem used to name per-image outputs ("dir/a.pgm" -> "a").
std::string image_key(const ManifestEntry& entry);

// PGM (P5) I/O. 8-bit files use maxval <= 255, 16-bit files maxval <= 65535.
Image load_image(const std::filesystem::path& path);
// Quantizes to 16 bits (maxval 65535).
void save_image(const Image& image, const std::filesystem::path& path);
LabelMap load_labelmap(const std::filesystem::path& path);
void save_labelmap(const LabelMap& map, const std::filesystem::path& path);
// Any nonzero sample counts as inside.
LungMask load_mask(const std::filesystem::path& path);
void save_mask(const LungMask& mask, const std::filesystem::path& path);

// Raw PGM payload, exposed for tests and tools that need the codes verbatim.
struct PgmData {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};
PgmData read_pgm(const std::filesystem::path& path);
void write_pgm(const PgmData& pgm, const std::filesystem::path& path);

// Lines are `split,image[,mask][,gt]`; relative paths resolve against the
// manifest's directory. Blank lines and `#` comments are skipped.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace selfseg
