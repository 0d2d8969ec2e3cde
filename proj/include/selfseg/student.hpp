#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "selfseg/dataset.hpp"

namespace selfseg {

struct NetConfig {
  int depth = 2;
  int base_channels = 8;
  std::uint64_t seed = 0;

  void validate() const;
  // Input sides must be multiples of this.
  int stride() const noexcept { return 1 << depth; }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct ConvSpec {
  int in_channels;
  int out_channels;
  int kernel;
  std::size_t weight_offset;
  std::size_t bias_offset;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel;
  }
};

// Convolutions in declaration order: for each encoder level two 3x3 convs,
// two bottleneck 3x3 convs, for each decoder level (deepest first) the
// post-upsample 3x3 conv and two 3x3 convs after the skip concat, then the
// final 1x1 projection to (Tissue, Cyst). Each layer stores weights
// [out][in][k][k] followed by biases [out].
std::vector<ConvSpec> layer_specs(const NetConfig& config);
std::size_t parameter_count(const NetConfig& config);

struct StudentParams {
  NetConfig config;
  std::vector<double> values;

  friend bool operator==(const StudentParams&, const StudentParams&) = default;
};

// He initialization (normal, std sqrt(2 / fan_in)) from the config seed;
// biases zero.
StudentParams init_params(const NetConfig& config);

// Channel-major [channel][y][x] activations.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kTissueChannel = 0;
inline constexpr int kCystChannel = 1;

// Two-channel logits at input resolution.
Tensor forward(const StudentParams& params, const Image& image);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dL/dlogits
  std::size_t cyst_pixels = 0;
  std::size_t tissue_pixels = 0;
  // No Cyst or Tissue pixels: nothing to learn from this sample.
  bool skip = false;
};

// Class-balanced softmax cross-entropy over Cyst/Tissue pixels. With
// beta = N_tissue / (N_cyst + N_tissue), Cyst pixels weigh beta and Tissue
// pixels 1 - beta; the loss is the weighted sum divided by N_cyst + N_tissue.
LossResult balanced_loss(const Tensor& logits, const LabelMap& labels);

// Per-pixel softmax probability of the Cyst channel.
std::vector<double> cyst_probability(const Tensor& logits);

struct LossAndGradient {
  double loss = 0.0;
  bool skip = false;
  std::vector<double> grad;  // same layout as StudentParams::values
};

LossAndGradient loss_and_gradient(const StudentParams& params, const Image& image, const LabelMap& labels);

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int iterations = 2000;
  std::uint64_t seed = 0;
  bool skip_empty = true;

  void validate() const;
};

struct TrainingSample {
  const Image* image;
  const LabelMap* labels;
};

struct TrainResult {
  StudentParams params;
  std::vector<double> loss_trace;
};

// SGD with momentum, one uniformly sampled image per step. With skip_empty
// only images whose labels contain a Cyst pixel are eligible. Throws a
// training-set error when nothing is eligible and a divergence error on a
// non-finite loss.
TrainResult train(const StudentParams& params, std::span<const TrainingSample> samples, const TrainConfig& config);

// Inside the mask: Cyst if the Cyst logit is strictly larger, else Tissue.
// Outside: Other.
LabelMap predict(const StudentParams& params, const Image& image, const LungMask& mask);

// Checkpoint: "SSEGPRM\0", u32 version, u32 depth, u32 base_channels,
// u64 seed, u64 count, then count little-endian f64 values.
void save_params(const StudentParams& params, const std::filesystem::path& path);
StudentParams load_params(const std::filesystem::path& path);

}  // namespace selfseg
