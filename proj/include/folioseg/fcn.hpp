#pragma once

// The encoder-decoder network: layer layout, initialization, forward and
// backward passes over the whole stack, and checkpoint files.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/preprocess.hpp"
#include "folioseg/random.hpp"
#include "folioseg/tensor.hpp"

namespace folioseg {

/// Filter counts of the five encoder convolutions and the three hidden
/// decoder layers; the last decoder layer always emits `classes` maps.
struct FcnConfig {
  int classes = 6;
  std::array<int, 5> encoder{40, 60, 120, 160, 240};
  std::array<int, 3> decoder{240, 120, 60};
  int kernel = 5;

  void validate() const {
    if (classes < 1 || classes > 6)
      throw DataError("class count must be in 1..6, got " + std::to_string(classes));
    for (int f : encoder)
      if (f < 1) throw DataError("encoder filter counts must be positive");
    for (int f : decoder)
      if (f < 1) throw DataError("decoder filter counts must be positive");
    if (kernel < 1 || kernel % 2 == 0)
      throw DataError("kernel size must be odd and positive, got " + std::to_string(kernel));
  }

  std::vector<int> filter_counts() const {
    std::vector<int> out(encoder.begin(), encoder.end());
    out.insert(out.end(), decoder.begin(), decoder.end());
    out.push_back(classes);
    return out;
  }

  /// FNV-1a over every shape-determining field.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::int64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= std::uint64_t(v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    mix(1);  // layout revision
    mix(classes);
    for (int f : encoder) mix(f);
    for (int f : decoder) mix(f);
    mix(kernel);
    return h;
  }

  friend bool operator==(const FcnConfig&, const FcnConfig&) = default;
};

enum class LayerKind { conv, deconv };

struct LayerSpec {
  LayerKind kind;
  int in_channels;
  int out_channels;
  int kernel;
  int stride;
  int padding;
  bool relu;
  bool pool_after;
};

/// encoder: conv, conv, pool, conv, conv, pool, conv
/// decoder: deconv(k, s1), deconv(2, s2), deconv(2, s2), deconv(k, s1) -> classes
/// ReLU follows every layer but the last.
inline std::vector<LayerSpec> layer_specs(const FcnConfig& cfg) {
  cfg.validate();
  const int k = cfg.kernel, pad = cfg.kernel / 2;
  const auto& e = cfg.encoder;
  const auto& d = cfg.decoder;
  return {
      {LayerKind::conv, 1, e[0], k, 1, pad, true, false},
      {LayerKind::conv, e[0], e[1], k, 1, pad, true, true},
      {LayerKind::conv, e[1], e[2], k, 1, pad, true, false},
      {LayerKind::conv, e[2], e[3], k, 1, pad, true, true},
      {LayerKind::conv, e[3], e[4], k, 1, pad, true, false},
      {LayerKind::deconv, e[4], d[0], k, 1, pad, true, false},
      {LayerKind::deconv, d[0], d[1], 2, 2, 0, true, false},
      {LayerKind::deconv, d[1], d[2], 2, 2, 0, true, false},
      {LayerKind::deconv, d[2], cfg.classes, k, 1, pad, false, false},
  };
}

/// Spatial dimensions must be divisible by this (two 2x2 pools).
inline constexpr int spatial_divisor = 4;

struct ModelParams {
  FcnConfig config;
  std::uint64_t seed = 0;
  /// Input standardization: network sees (v/255 - mean) / std.
  double input_mean = 0.0;
  double input_std = 1.0;
  /// Geometry the model was trained at; prediction uses the same.
  NetInputSpec input_spec;
  std::vector<ConvParams> layers;

  std::uint64_t config_hash() const { return config.hash(); }
  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
};

/// Zero biases; weights uniform in +-sqrt(6 / fan_in), where fan_in counts
/// the inputs that reach one output (in * k * k / stride^2 for transposed
/// convolutions).
inline ModelParams build_fcn(const FcnConfig& cfg, std::uint64_t seed) {
  const auto specs = layer_specs(cfg);
  ModelParams m;
  m.config = cfg;
  m.seed = seed;
  Rng rng(seed);
  for (const auto& s : specs) {
    ConvParams p;
    const size_t in = size_t(s.in_channels), out = size_t(s.out_channels), k = size_t(s.kernel);
    if (s.kind == LayerKind::conv) p.weights = Tensor4({out, in, k, k});
    else p.weights = Tensor4({in, out, k, k});
    p.bias.assign(out, 0.0);
    p.stride = size_t(s.stride);
    p.padding = size_t(s.padding);
    const double fan_in = double(in * k * k) / double(s.stride * s.stride);
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& w : p.weights.values()) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(p));
  }
  return m;
}

/// Intermediate values kept by forward() for backward().
struct ForwardTrace {
  std::vector<Tensor4> inputs;
  std::vector<Tensor4> pre_activations;
  std::vector<PoolResult> pools;
};

struct ParamGrads {
  std::vector<Tensor4> weights;
  std::vector<std::vector<double>> bias;
};

inline void check_network_input(const ModelParams& params, const Tensor4& x) {
  if (params.layers.size() != layer_specs(params.config).size())
    throw DataError("model parameters do not match the configured layer list");
  const auto& s = x.shape();
  if (s.c != 1) throw DataError("network input must have 1 channel, got " + std::to_string(s.c));
  if (s.h % spatial_divisor != 0 || s.w % spatial_divisor != 0)
    throw DataError("network input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                    " is not divisible by " + std::to_string(spatial_divisor) +
                    "; pad the page to the next multiple first");
}

/// Logits (N, C, H, W) for input (N, 1, H, W). Pass a trace to enable backward().
inline Tensor4 forward(const ModelParams& params, const Tensor4& x, ForwardTrace* trace = nullptr) {
  check_network_input(params, x);
  const auto specs = layer_specs(params.config);
  if (trace) *trace = ForwardTrace{};
  Tensor4 cur = x;
  for (size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    Tensor4 z = s.kind == LayerKind::conv ? conv2d_fwd(cur, params.layers[l])
                                          : deconv2d_fwd(cur, params.layers[l]);
    if (trace) trace->inputs.push_back(std::move(cur));
    if (s.relu) {
      cur = relu_fwd(z);
      if (trace) trace->pre_activations.push_back(std::move(z));
    } else {
      cur = std::move(z);
      if (trace) trace->pre_activations.emplace_back();
    }
    if (s.pool_after) {
      PoolResult pr = maxpool2_fwd(cur);
      cur = pr.y;
      if (trace) trace->pools.push_back(std::move(pr));
    } else if (trace) {
      trace->pools.emplace_back();
    }
  }
  return cur;
}

inline ParamGrads backward(const ModelParams& params, const ForwardTrace& trace,
                           const Tensor4& dlogits) {
  const auto specs = layer_specs(params.config);
  if (trace.inputs.size() != specs.size()) throw DataError("backward: incomplete forward trace");
  ParamGrads g;
  g.weights.resize(specs.size());
  g.bias.resize(specs.size());
  Tensor4 d = dlogits;
  for (size_t l = specs.size(); l-- > 0;) {
    const auto& s = specs[l];
    if (s.pool_after) d = maxpool2_bwd(trace.pools[l], d);
    if (s.relu) d = relu_bwd(trace.pre_activations[l], d);
    ConvGrads cg = s.kind == LayerKind::conv
                       ? conv2d_bwd(trace.inputs[l], params.layers[l], d)
                       : deconv2d_bwd(trace.inputs[l], params.layers[l], d);
    g.weights[l] = std::move(cg.dw);
    g.bias[l] = std::move(cg.db);
    d = std::move(cg.dx);
  }
  return g;
}

// ------------------------------------------------------------- checkpoints

namespace detail {

inline constexpr char checkpoint_magic[8] = {'F', 'O', 'L', 'I', 'O', 'S', 'E', 'G'};
inline constexpr std::uint32_t checkpoint_version = 1;

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::string name) : b_(b), name_(std::move(name)) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == b_.size(); }
  void need(size_t n) const {
    if (b_.size() - pos_ < n)
      throw DataError(name_ + ": truncated checkpoint at byte offset " + std::to_string(pos_));
  }
  size_t pos() const { return pos_; }
  void skip(size_t n) { need(n); pos_ += n; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::string name_;
  size_t pos_ = 0;
};

}  // namespace detail

/// Layout: magic "FOLIOSEG", u32 version, u64 config hash, u64 seed,
/// i32 classes, 5 x i32 encoder, 3 x i32 decoder, i32 kernel, f64 input
/// mean, f64 input std, i32 input width, i32 input height, i32 ratio
/// numerator, i32 ratio denominator, i32 pad divisor, then every layer's
/// weights and bias in layer order. All values little-endian.
inline std::vector<std::uint8_t> serialize_params(const ModelParams& m) {
  std::vector<std::uint8_t> out(std::begin(detail::checkpoint_magic),
                                std::end(detail::checkpoint_magic));
  detail::put_u32(out, detail::checkpoint_version);
  detail::put_u64(out, m.config_hash());
  detail::put_u64(out, m.seed);
  detail::put_u32(out, std::uint32_t(m.config.classes));
  for (int f : m.config.encoder) detail::put_u32(out, std::uint32_t(f));
  for (int f : m.config.decoder) detail::put_u32(out, std::uint32_t(f));
  detail::put_u32(out, std::uint32_t(m.config.kernel));
  detail::put_f64(out, m.input_mean);
  detail::put_f64(out, m.input_std);
  detail::put_u32(out, std::uint32_t(m.input_spec.width));
  detail::put_u32(out, std::uint32_t(m.input_spec.height));
  detail::put_u32(out, std::uint32_t(m.input_spec.ratio.num));
  detail::put_u32(out, std::uint32_t(m.input_spec.ratio.den));
  detail::put_u32(out, std::uint32_t(m.input_spec.divisor));
  for (const auto& l : m.layers) {
    for (double w : l.weights.values()) detail::put_f64(out, w);
    for (double b : l.bias) detail::put_f64(out, b);
  }
  return out;
}

inline ModelParams deserialize_params(const std::vector<std::uint8_t>& bytes,
                                      const std::string& name = "<memory>") {
  detail::ByteReader r(bytes, name);
  r.need(8);
  if (std::memcmp(bytes.data(), detail::checkpoint_magic, 8) != 0)
    throw DataError(name + ": not a folioseg checkpoint (bad magic bytes)");
  r.skip(8);
  const auto version = r.u32();
  if (version != detail::checkpoint_version)
    throw DataError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto hash = r.u64();
  ModelParams m;
  m.seed = r.u64();
  m.config.classes = int(r.u32());
  for (auto& f : m.config.encoder) f = int(r.u32());
  for (auto& f : m.config.decoder) f = int(r.u32());
  m.config.kernel = int(r.u32());
  m.config.validate();
  if (m.config.hash() != hash)
    throw DataError(name + ": config hash does not match stored configuration");
  m.input_mean = r.f64();
  m.input_std = r.f64();
  m.input_spec.width = int(r.u32());
  m.input_spec.height = int(r.u32());
  m.input_spec.ratio.num = long(r.u32());
  m.input_spec.ratio.den = long(r.u32());
  m.input_spec.divisor = int(r.u32());
  m.input_spec.validate();
  ModelParams shapes = build_fcn(m.config, 0);
  m.layers = std::move(shapes.layers);
  for (auto& l : m.layers) {
    r.need(8 * (l.weights.size() + l.bias.size()));
    for (auto& w : l.weights.values()) w = r.f64();
    for (auto& b : l.bias) b = r.f64();
  }
  if (!r.done()) throw DataError(name + ": trailing bytes after checkpoint data");
  return m;
}

inline void save_params(const std::filesystem::path& path, const ModelParams& m) {
  const auto bytes = serialize_params(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_params(bytes, path.string());
}

/// Refuses checkpoints whose configuration differs from `expected`.
inline ModelParams load_params(const std::filesystem::path& path, const FcnConfig& expected) {
  ModelParams m = load_params(path);
  if (m.config_hash() != expected.hash())
    throw DataError(path.string() + ": checkpoint config (" + std::to_string(m.config.classes) +
                    " classes) does not match the expected configuration (" +
                    std::to_string(expected.classes) + " classes)");
  return m;
}

}  // namespace folioseg
