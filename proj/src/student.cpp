#include "selfseg/student.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "selfseg/error.hpp"
#include "selfseg/kernels.hpp"
#include "selfseg/random.hpp"

namespace fs = std::filesystem;

namespace selfseg {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'P', 'R', 'M', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kMaxDepth = 6;

kernels::Planes planes(const Tensor& t) { return {t.channels, t.height, t.width}; }

std::span<const double> weights_of(const StudentParams& p, const ConvSpec& s) {
  return {p.values.data() + s.weight_offset, s.weight_count()};
}
std::span<const double> bias_of(const StudentParams& p, const ConvSpec& s) {
  return {p.values.data() + s.bias_offset, static_cast<std::size_t>(s.out_channels)};
}

Tensor conv(const Tensor& in, const StudentParams& p, const ConvSpec& s) {
  Tensor out(s.out_channels, in.height, in.width);
  kernels::conv2d_forward(in.data, planes(in), weights_of(p, s), bias_of(p, s), s.out_channels, s.kernel, out.data);
  return out;
}

// Accumulates parameter gradients into `grad`; returns dL/din.
Tensor conv_backward(const Tensor& in, const StudentParams& p, const ConvSpec& s, const Tensor& grad_out,
                     std::vector<double>& grad, bool need_input_grad = true) {
  kernels::conv2d_backward_params(in.data, planes(in), grad_out.data, s.out_channels, s.kernel,
                                  {grad.data() + s.weight_offset, s.weight_count()},
                                  {grad.data() + s.bias_offset, static_cast<std::size_t>(s.out_channels)});
  Tensor grad_in(in.channels, in.height, in.width);
  if (need_input_grad) {
    kernels::conv2d_backward_input(grad_out.data, planes(in), weights_of(p, s), s.out_channels, s.kernel,
                                   grad_in.data);
  }
  return grad_in;
}

void relu(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// Zeroes gradient where the rectifier output was not positive.
void relu_backward(const Tensor& activated, Tensor& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(activated.data[i] > 0.0)) grad.data[i] = 0.0;
  }
}

Tensor maxpool(const Tensor& in, std::vector<std::uint32_t>& argmax) {
  Tensor out(in.channels, in.height / 2, in.width / 2);
  argmax.resize(out.data.size());
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x, ++o) {
        std::uint32_t best = static_cast<std::uint32_t>(c * in.plane() + static_cast<std::size_t>(2 * y) * in.width + 2 * x);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const auto i =
                static_cast<std::uint32_t>(c * in.plane() + static_cast<std::size_t>(2 * y + dy) * in.width + 2 * x + dx);
            if (in.data[i] > in.data[best]) best = i;
          }
        }
        argmax[o] = best;
        out.data[o] = in.data[best];
      }
    }
  }
  return out;
}

void maxpool_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax, Tensor& grad_in) {
  for (std::size_t o = 0; o < grad_out.data.size(); ++o) grad_in.data[argmax[o]] += grad_out.data[o];
}

Tensor upsample(const Tensor& in) {
  Tensor out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
  return out;
}

Tensor upsample_backward(const Tensor& grad_out) {
  Tensor g(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
  for (int c = 0; c < grad_out.channels; ++c) {
    for (int y = 0; y < grad_out.height; ++y) {
      for (int x = 0; x < grad_out.width; ++x) g.at(c, y / 2, x / 2) += grad_out.at(c, y, x);
    }
  }
  return g;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

struct Layout {
  int depth;
  std::size_t enc(int level, int j) const { return 2 * level + j; }
  std::size_t bottleneck(int j) const { return 2 * depth + j; }
  std::size_t dec(int level, int j) const { return 2 * depth + 2 + 3 * (depth - 1 - level) + j; }
  std::size_t final_layer() const { return 2 * depth + 2 + 3 * depth; }
};

struct Cache {
  std::vector<Tensor> enc_in, enc_a, enc_b, pooled;
  std::vector<std::vector<std::uint32_t>> pool_idx;
  Tensor bott_a, bott_b;
  std::vector<Tensor> up_in, cat, dec_a, dec_b;
  Tensor logits;
};

void check_input(const NetConfig& config, const Image& image) {
  if (image.width() % config.stride() != 0 || image.height() % config.stride() != 0) {
    throw shape_error("image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                      " not divisible by 2^depth = " + std::to_string(config.stride()));
  }
}

void run_forward(const StudentParams& p, const Image& image, Cache& c) {
  const NetConfig& cfg = p.config;
  check_input(cfg, image);
  if (p.values.size() != parameter_count(cfg)) throw shape_error("parameter vector does not match network config");
  const auto specs = layer_specs(cfg);
  const Layout L{cfg.depth};
  const int d = cfg.depth;
  c.enc_in.resize(d);
  c.enc_a.resize(d);
  c.enc_b.resize(d);
  c.pooled.resize(d);
  c.pool_idx.resize(d);
  c.up_in.resize(d);
  c.cat.resize(d);
  c.dec_a.resize(d);
  c.dec_b.resize(d);

  Tensor x(1, image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), x.data.begin());
  for (int i = 0; i < d; ++i) {
    c.enc_in[i] = std::move(x);
    c.enc_a[i] = conv(c.enc_in[i], p, specs[L.enc(i, 0)]);
    relu(c.enc_a[i]);
    c.enc_b[i] = conv(c.enc_a[i], p, specs[L.enc(i, 1)]);
    relu(c.enc_b[i]);
    c.pooled[i] = maxpool(c.enc_b[i], c.pool_idx[i]);
    x = c.pooled[i];
  }
  c.bott_a = conv(x, p, specs[L.bottleneck(0)]);
  relu(c.bott_a);
  c.bott_b = conv(c.bott_a, p, specs[L.bottleneck(1)]);
  relu(c.bott_b);

  const Tensor* y = &c.bott_b;
  for (int i = d - 1; i >= 0; --i) {
    c.up_in[i] = upsample(*y);
    const Tensor up = conv(c.up_in[i], p, specs[L.dec(i, 0)]);
    c.cat[i] = concat(c.enc_b[i], up);
    c.dec_a[i] = conv(c.cat[i], p, specs[L.dec(i, 1)]);
    relu(c.dec_a[i]);
    c.dec_b[i] = conv(c.dec_a[i], p, specs[L.dec(i, 2)]);
    relu(c.dec_b[i]);
    y = &c.dec_b[i];
  }
  c.logits = conv(*y, p, specs[L.final_layer()]);
}

std::vector<double> run_backward(const StudentParams& p, const Cache& c, const Tensor& dlogits) {
  const int d = p.config.depth;
  const auto specs = layer_specs(p.config);
  const Layout L{d};
  std::vector<double> grad(p.values.size(), 0.0);

  Tensor dy = conv_backward(c.dec_b[0], p, specs[L.final_layer()], dlogits, grad);
  std::vector<Tensor> dskip(d);
  for (int i = 0; i < d; ++i) {
    relu_backward(c.dec_b[i], dy);
    Tensor da = conv_backward(c.dec_a[i], p, specs[L.dec(i, 2)], dy, grad);
    relu_backward(c.dec_a[i], da);
    Tensor dcat = conv_backward(c.cat[i], p, specs[L.dec(i, 1)], da, grad);
    const int skip_channels = c.enc_b[i].channels;
    const std::size_t split = static_cast<std::size_t>(skip_channels) * dcat.plane();
    dskip[i] = Tensor(skip_channels, dcat.height, dcat.width);
    std::copy(dcat.data.begin(), dcat.data.begin() + static_cast<std::ptrdiff_t>(split), dskip[i].data.begin());
    Tensor dup(dcat.channels - skip_channels, dcat.height, dcat.width);
    std::copy(dcat.data.begin() + static_cast<std::ptrdiff_t>(split), dcat.data.end(), dup.data.begin());
    const Tensor dup_in = conv_backward(c.up_in[i], p, specs[L.dec(i, 0)], dup, grad);
    dy = upsample_backward(dup_in);
  }

  relu_backward(c.bott_b, dy);
  Tensor dba = conv_backward(c.bott_a, p, specs[L.bottleneck(1)], dy, grad);
  relu_backward(c.bott_a, dba);
  Tensor dpool = conv_backward(c.pooled[d - 1], p, specs[L.bottleneck(0)], dba, grad);

  for (int i = d - 1; i >= 0; --i) {
    Tensor db = std::move(dskip[i]);
    maxpool_backward(dpool, c.pool_idx[i], db);
    relu_backward(c.enc_b[i], db);
    Tensor da = conv_backward(c.enc_a[i], p, specs[L.enc(i, 1)], db, grad);
    relu_backward(c.enc_a[i], da);
    Tensor din = conv_backward(c.enc_in[i], p, specs[L.enc(i, 0)], da, grad, i > 0);
    if (i > 0) dpool = std::move(din);
  }
  return grad;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::ofstream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint64_t get_le(std::ifstream& in, int bytes, const fs::path& path) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), bytes);
  if (in.gcount() != bytes) throw format_error(path.string() + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace

void NetConfig::validate() const {
  if (depth < 1 || depth > kMaxDepth) throw config_error("network depth must be in [1, 6]");
  if (base_channels < 1) throw config_error("base_channels must be >= 1");
}

std::vector<ConvSpec> layer_specs(const NetConfig& config) {
  config.validate();
  std::vector<ConvSpec> specs;
  std::size_t offset = 0;
  auto add = [&](int in, int out, int k) {
    ConvSpec s{in, out, k, offset, 0};
    s.bias_offset = offset + s.weight_count();
    offset = s.bias_offset + out;
    specs.push_back(s);
  };
  auto channels = [&](int level) { return config.base_channels << level; };
  for (int i = 0; i < config.depth; ++i) {
    add(i == 0 ? 1 : channels(i - 1), channels(i), 3);
    add(channels(i), channels(i), 3);
  }
  add(channels(config.depth - 1), channels(config.depth), 3);
  add(channels(config.depth), channels(config.depth), 3);
  for (int i = config.depth - 1; i >= 0; --i) {
    add(channels(i + 1), channels(i), 3);
    add(2 * channels(i), channels(i), 3);
    add(channels(i), channels(i), 3);
  }
  add(channels(0), 2, 1);
  return specs;
}

std::size_t parameter_count(const NetConfig& config) {
  const auto specs = layer_specs(config);
  return specs.back().bias_offset + static_cast<std::size_t>(specs.back().out_channels);
}

StudentParams init_params(const NetConfig& config) {
  StudentParams p{config, std::vector<double>(parameter_count(config), 0.0)};
  Rng rng(config.seed);
  for (const auto& s : layer_specs(config)) {
    const double std = std::sqrt(2.0 / (s.in_channels * s.kernel * s.kernel));
    for (std::size_t i = 0; i < s.weight_count(); ++i) p.values[s.weight_offset + i] = std * rng.normal();
  }
  return p;
}

Tensor forward(const StudentParams& params, const Image& image) {
  Cache c;
  run_forward(params, image, c);
  return std::move(c.logits);
}

LossResult balanced_loss(const Tensor& logits, const LabelMap& labels) {
  if (logits.channels != 2 || logits.width != labels.width() || logits.height != labels.height()) {
    throw shape_error("logits and label map shapes differ");
  }
  LossResult r;
  r.grad = Tensor(2, logits.height, logits.width);
  r.cyst_pixels = labels.count(Label::Cyst);
  r.tissue_pixels = labels.count(Label::Tissue);
  const std::size_t n = r.cyst_pixels + r.tissue_pixels;
  if (n == 0) {
    r.skip = true;
    return r;
  }
  const double beta = static_cast<double>(r.tissue_pixels) / static_cast<double>(n);
  const std::size_t plane = logits.plane();
  double sum = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const Label l = labels[i];
    if (l != Label::Cyst && l != Label::Tissue) continue;
    const double z0 = logits.data[i], z1 = logits.data[plane + i];
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const double p0 = std::exp(z0 - lse), p1 = std::exp(z1 - lse);
    const bool cyst = l == Label::Cyst;
    const double w = cyst ? beta : 1.0 - beta;
    sum += w * (lse - (cyst ? z1 : z0));
    r.grad.data[i] = w * (p0 - (cyst ? 0.0 : 1.0)) / static_cast<double>(n);
    r.grad.data[plane + i] = w * (p1 - (cyst ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  r.loss = sum / static_cast<double>(n);
  return r;
}

std::vector<double> cyst_probability(const Tensor& logits) {
  const std::size_t plane = logits.plane();
  std::vector<double> p(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double z0 = logits.data[i], z1 = logits.data[plane + i];
    p[i] = 1.0 / (1.0 + std::exp(z0 - z1));
  }
  return p;
}

LossAndGradient loss_and_gradient(const StudentParams& params, const Image& image, const LabelMap& labels) {
  Cache c;
  run_forward(params, image, c);
  LossResult lr = balanced_loss(c.logits, labels);
  LossAndGradient out;
  out.loss = lr.loss;
  out.skip = lr.skip;
  if (lr.skip) {
    out.grad.assign(params.values.size(), 0.0);
    return out;
  }
  out.grad = run_backward(params, c, lr.grad);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw config_error("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw config_error("momentum must be in [0, 1)");
  if (iterations < 1) throw config_error("iterations must be >= 1");
}

TrainResult train(const StudentParams& params, std::span<const TrainingSample> samples, const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || cfg.iterations < 0) throw config_error("invalid training config");
  TrainResult result{params, {}};
  if (cfg.iterations == 0) return result;

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LabelMap& l = *samples[i].labels;
    check_input(params.config, *samples[i].image);
    if (l.width() != samples[i].image->width() || l.height() != samples[i].image->height()) {
      throw dimension_error("training label map does not match its image");
    }
    const bool has_cyst = l.count(Label::Cyst) > 0;
    const bool has_support = has_cyst || l.count(Label::Tissue) > 0;
    if (cfg.skip_empty ? has_cyst : has_support) eligible.push_back(i);
  }
  if (eligible.empty()) throw training_set_error("no eligible training images (every label map lacks cysts)");

  Rng rng(cfg.seed);
  std::vector<double> velocity(params.values.size(), 0.0);
  auto& theta = result.params.values;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    const TrainingSample& s = samples[eligible[rng.below(eligible.size())]];
    const LossAndGradient lg = loss_and_gradient(result.params, *s.image, *s.labels);
    if (!std::isfinite(lg.loss)) {
      throw divergence_error("non-finite training loss at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(lg.loss);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      velocity[j] = cfg.momentum * velocity[j] - cfg.learning_rate * lg.grad[j];
      theta[j] += velocity[j];
    }
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw divergence_error("non-finite parameters after training");
  }
  return result;
}

LabelMap predict(const StudentParams& params, const Image& image, const LungMask& mask) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw dimension_error("mask does not match image");
  }
  LabelMap out(image.width(), image.height(), Label::Other);
  if (mask.count() == 0) return out;
  const Tensor logits = forward(params, image);
  const std::size_t plane = logits.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    if (!mask[i]) continue;
    out.set(i, logits.data[plane + i] > logits.data[i] ? Label::Cyst : Label::Tissue);
  }
  return out;
}

void save_params(const StudentParams& params, const fs::path& path) {
  if (params.values.size() != parameter_count(params.config)) throw shape_error("parameter count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.config.depth));
  put_u32(out, static_cast<std::uint32_t>(params.config.base_channels));
  put_u64(out, params.config.seed);
  put_u64(out, params.values.size());
  for (double v : params.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw io_error("write failed for " + path.string());
}

StudentParams load_params(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw format_error(path.string() + ": bad checkpoint magic");
  }
  const auto version = get_le(in, 4, path);
  if (version != kCheckpointVersion) throw format_error(path.string() + ": unsupported checkpoint version");
  StudentParams p;
  p.config.depth = static_cast<int>(get_le(in, 4, path));
  p.config.base_channels = static_cast<int>(get_le(in, 4, path));
  p.config.seed = get_le(in, 8, path);
  try {
    p.config.validate();
  } catch (const Error& e) {
    throw format_error(path.string() + ": " + e.what());
  }
  const auto count = get_le(in, 8, path);
  if (count != parameter_count(p.config)) throw format_error(path.string() + ": parameter count mismatch");
  p.values.resize(count);
  for (auto& v : p.values) {
    v = std::bit_cast<double>(get_le(in, 8, path));
    if (!std::isfinite(v)) throw format_error(path.string() + ": non-finite parameter");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw format_error(path.string() + ": trailing bytes");
  return p;
}

}  // namespace selfseg
