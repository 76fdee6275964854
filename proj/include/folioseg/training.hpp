#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/fcn.hpp"
#include "folioseg/image.hpp"
#include "folioseg/pipeline.hpp"
#include "folioseg/random.hpp"
#include "folioseg/tensor.hpp"

namespace folioseg {

struct MaskedLoss {
  double loss = 0.0;
  size_t counted = 0;
  Tensor4 dlogits;
  bool fully_ignored = false;  // every target pixel was 0
};

/// Mean cross-entropy over pixels whose target is non-zero. Label t maps
/// to channel t-1; pixels with target 0 contribute nothing, and their
/// gradient is exactly zero.
inline MaskedLoss masked_ce(const Tensor4& logits, std::span<const LabelMask> targets) {
  const auto& s = logits.shape();
  if (targets.size() != s.n)
    throw DataError("masked_ce: " + std::to_string(targets.size()) + " targets for batch of " +
                    std::to_string(s.n));
  for (const auto& t : targets) {
    require_same_dims(t, int(s.w), int(s.h), "masked_ce target vs logits");
    for (auto v : t.data())
      if (v > s.c)
        throw DataError("masked_ce: target label " + std::to_string(v) + " exceeds class count " +
                        std::to_string(s.c));
  }

  MaskedLoss r;
  r.dlogits = Tensor4(s);
  for (const auto& t : targets)
    for (auto v : t.data()) r.counted += v != 0;
  if (r.counted == 0) {
    r.fully_ignored = true;
    return r;
  }

  const double inv_m = 1.0 / double(r.counted);
  const size_t plane = s.plane();
  std::vector<double> prob(s.c);
  double total = 0.0;
  for (size_t n = 0; n < s.n; ++n) {
    const double* z = logits.plane(n, 0);
    double* dz = r.dlogits.plane(n, 0);
    const auto labels = targets[n].data();
    for (size_t p = 0; p < plane; ++p) {
      const int label = labels[p];
      if (label == 0) continue;
      double m = z[p];
      for (size_t c = 1; c < s.c; ++c) m = std::max(m, z[c * plane + p]);
      double sum = 0.0;
      for (size_t c = 0; c < s.c; ++c) sum += (prob[c] = std::exp(z[c * plane + p] - m));
      const size_t target = size_t(label - 1);
      total -= z[target * plane + p] - m - std::log(sum);
      for (size_t c = 0; c < s.c; ++c)
        dz[c * plane + p] = (prob[c] / sum - (c == target ? 1.0 : 0.0)) * inv_m;
    }
  }
  r.loss = total * inv_m;
  return r;
}

// --------------------------------------------------------------- optimizers

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  int iterations = 1;
  int batch_size = 1;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0 disables interval checkpoints
  std::filesystem::path checkpoint_dir;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw DataError("learning rate must be a finite non-negative number");
    if (iterations < 1) throw DataError("iterations must be >= 1");
    if (batch_size < 1) throw DataError("batch size must be >= 1");
    if (checkpoint_interval < 0) throw DataError("checkpoint interval must be >= 0");
  }
};

using ParamViews = std::vector<std::span<double>>;
using GradViews = std::vector<std::span<const double>>;

inline ParamViews parameter_views(ModelParams& m) {
  ParamViews v;
  for (auto& l : m.layers) {
    v.push_back(l.weights.values());
    v.push_back(l.bias);
  }
  return v;
}

inline GradViews gradient_views(const ParamGrads& g) {
  GradViews v;
  for (size_t l = 0; l < g.weights.size(); ++l) {
    v.push_back(g.weights[l].values());
    v.push_back(g.bias[l]);
  }
  return v;
}

/// First/second moments (Adam) or velocity (SGD, in `first`).
struct OptimizerState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  long step = 0;
};

namespace detail {
inline void check_views(const ParamViews& p, const GradViews& g, OptimizerState& st, bool second) {
  if (p.size() != g.size()) throw DataError("optimizer: parameter/gradient count mismatch");
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i].size() != g[i].size())
      throw DataError("optimizer: shape mismatch in parameter block " + std::to_string(i));
  if (st.first.empty()) {
    for (const auto& v : p) {
      st.first.emplace_back(v.size(), 0.0);
      if (second) st.second.emplace_back(v.size(), 0.0);
    }
  }
  if (st.first.size() != p.size())
    throw DataError("optimizer: state does not match parameter blocks");
}
}  // namespace detail

/// Adam with bias-corrected moments.
inline void adam_step(const ParamViews& params, const GradViews& grads, OptimizerState& st,
                      const TrainConfig& cfg) {
  detail::check_views(params, grads, st, true);
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(st.step));
  for (size_t b = 0; b < params.size(); ++b) {
    auto& m = st.first[b];
    auto& v = st.second[b];
    for (size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      params[b][i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
}

/// Heavy-ball SGD: v = momentum * v + g; p -= lr * v.
inline void sgd_step(const ParamViews& params, const GradViews& grads, OptimizerState& st,
                     const TrainConfig& cfg) {
  detail::check_views(params, grads, st, false);
  ++st.step;
  for (size_t b = 0; b < params.size(); ++b) {
    auto& vel = st.first[b];
    for (size_t i = 0; i < params[b].size(); ++i) {
      vel[i] = cfg.momentum * vel[i] + grads[b][i];
      params[b][i] -= cfg.learning_rate * vel[i];
    }
  }
}

// ------------------------------------------------------------- training loop

struct LossReport {
  int iteration = 0;
  double loss = 0.0;
  size_t counted = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossReport> curve;
};

using TrainProgress = std::function<void(const LossReport&)>;

/// Pads a network-resolution target with ignored pixels up to the padded
/// network grid.
inline LabelMask pad_target(const LabelMask& t, const NetInputSpec& spec) {
  LabelMask out(spec.padded_width(), spec.padded_height());
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x) out.at(x, y) = t.at(x, y);
  return out;
}

/// Weights are initialized from cfg.seed; the page order is a seeded
/// shuffle per epoch drawn from a stream derived from the same seed.
inline TrainResult train(std::span<const TrainingSample> samples, const FcnConfig& fcn,
                         const TrainConfig& cfg, const NetInputSpec& spec,
                         const TrainProgress& progress = {}) {
  cfg.validate();
  spec.validate();
  if (samples.empty()) throw DataError("training split is empty");

  TrainResult result;
  result.params = build_fcn(fcn, cfg.seed);
  std::vector<const Pixmap*> smalls;
  std::vector<LabelMask> targets;
  for (const auto& s : samples) {
    if (s.small.width() != spec.width || s.small.height() != spec.height)
      throw DataError("training sample does not match the network input size");
    smalls.push_back(&s.small);
    targets.push_back(pad_target(s.target, spec));
  }
  const InputStats stats = input_statistics(smalls);
  result.params.input_mean = stats.mean;
  result.params.input_std = stats.std;
  result.params.input_spec = spec;

  Rng order_rng(derive_seed(cfg.seed, {1}));
  std::vector<size_t> order;
  size_t cursor = 0;
  auto next_index = [&]() {
    if (cursor == order.size()) {
      order.resize(samples.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      order_rng.shuffle(order);
      cursor = 0;
    }
    return order[cursor++];
  };

  OptimizerState state;
  ForwardTrace trace;
  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<const Pixmap*> batch;
    std::vector<LabelMask> batch_targets;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t i = next_index();
      batch.push_back(smalls[i]);
      batch_targets.push_back(targets[i]);
    }
    auto& params = result.params;
    const Tensor4 x = to_input_tensor(batch, params.input_mean, params.input_std, spec);
    const Tensor4 logits = forward(params, x, &trace);
    const MaskedLoss loss = masked_ce(logits, batch_targets);
    if (!std::isfinite(loss.loss))
      throw NumericError("non-finite training loss at iteration " + std::to_string(it) +
                         " (counted pixels " + std::to_string(loss.counted) + ")");
    const LossReport report{it, loss.loss, loss.counted};
    result.curve.push_back(report);
    if (progress) progress(report);

    if (!loss.fully_ignored) {
      const ParamGrads grads = backward(params, trace, loss.dlogits);
      if (cfg.optimizer == OptimizerKind::adam)
        adam_step(parameter_views(params), gradient_views(grads), state, cfg);
      else
        sgd_step(parameter_views(params), gradient_views(grads), state, cfg);
    }

    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() &&
        it % cfg.checkpoint_interval == 0)
      save_params(cfg.checkpoint_dir / ("checkpoint_" + std::to_string(it) + ".ckpt"), params);
  }
  return result;
}

inline void write_loss_csv(std::ostream& out, const std::vector<LossReport>& curve) {
  out << "iteration,loss,counted_pixels\n";
  out.precision(17);
  for (const auto& r : curve) out << r.iteration << "," << r.loss << "," << r.counted << "\n";
}

}  // namespace folioseg
