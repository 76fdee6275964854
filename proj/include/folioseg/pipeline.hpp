#pragma once

// Moving pages between original resolution and the network's input grid,
// and the full prediction path.

#include <span>
#include <vector>

#include "folioseg/fcn.hpp"
#include "folioseg/image.hpp"
#include "folioseg/preprocess.hpp"
#include "folioseg/tensor.hpp"

namespace folioseg {

/// A page as the network sees it, plus what is needed to map back.
struct NetworkView {
  Pixmap small;  // grayscale, spec.width x spec.height
  Placement placement;
  int page_width = 0;
  int page_height = 0;
};

inline NetworkView to_network_view(const Pixmap& page, const NetInputSpec& spec) {
  spec.validate();
  const Pixmap gray = to_grayscale(page);
  auto fitted = fit_to_ratio(gray, spec.ratio, 255);
  return {resize(fitted.image, spec.width, spec.height, ResizeMode::area), fitted.placement,
          page.width(), page.height()};
}

/// Network-resolution label mask back to the page: nearest upscale to the
/// fitted canvas, then cut out the original page area.
inline LabelMask from_network_labels(const LabelMask& small, const NetworkView& view) {
  const LabelMask canvas = resize(small, view.placement.canvas_width,
                                  view.placement.canvas_height, ResizeMode::nearest);
  return crop(canvas, view.placement.x, view.placement.y, view.page_width, view.page_height);
}

/// Training pair at network resolution. The target keeps ground truth on
/// ink pixels of the binarized small page and is 0 elsewhere.
struct TrainingSample {
  Pixmap small;
  LabelMask target;
};

inline TrainingSample make_training_sample(const Pixmap& page, const LabelMask& gt,
                                           const NetInputSpec& spec) {
  require_same_dims(gt, page.width(), page.height(), "ground truth vs page");
  NetworkView view = to_network_view(page, spec);
  const auto gt_fit = fit_to_ratio(gt, spec.ratio, 0);
  const LabelMask gt_small = resize(gt_fit.image, spec.width, spec.height, ResizeMode::nearest);
  const BinaryMask bin = binarize_otsu(view.small).mask;
  return {std::move(view.small), make_target(gt_small, bin)};
}

struct InputStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Global mean and standard deviation of v/255 over all samples.
inline InputStats input_statistics(std::span<const Pixmap* const> pages) {
  double n = 0.0, sum = 0.0, sq = 0.0;
  for (const Pixmap* p : pages)
    for (auto v : p->data()) {
      const double x = v / 255.0;
      sum += x;
      sq += x * x;
      n += 1.0;
    }
  if (n == 0.0) return {};
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  const double sd = std::sqrt(var);
  return {mean, sd > 1e-6 ? sd : 1.0};
}

/// Stacks grayscale pages into (N, 1, H', W'), standardized, zero-padded
/// on the bottom/right to the spec's divisor.
inline Tensor4 to_input_tensor(std::span<const Pixmap* const> pages, double mean, double sd,
                               const NetInputSpec& spec) {
  const size_t h = size_t(spec.padded_height()), w = size_t(spec.padded_width());
  Tensor4 x({pages.size(), 1, h, w});
  for (size_t n = 0; n < pages.size(); ++n) {
    const Pixmap& p = *pages[n];
    if (p.channels() != 1 || p.width() != spec.width || p.height() != spec.height)
      throw DataError("network input page has wrong geometry");
    for (int y = 0; y < p.height(); ++y)
      for (int xx = 0; xx < p.width(); ++xx)
        x(n, 0, size_t(y), size_t(xx)) = (p.at(xx, y) / 255.0 - mean) / sd;
  }
  return x;
}

/// Per-pixel argmax over channels, cropped to width x height. Labels are
/// channel index + 1; ties go to the smallest channel.
inline LabelMask argmax_labels(const Tensor4& logits, size_t n, int width, int height) {
  const auto& s = logits.shape();
  LabelMask out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      size_t best = 0;
      for (size_t c = 1; c < s.c; ++c)
        if (logits(n, c, size_t(y), size_t(x)) > logits(n, best, size_t(y), size_t(x))) best = c;
      out.at(x, y) = std::uint8_t(best + 1);
    }
  return out;
}

/// Full-page prediction at the page's own resolution.
inline LabelMask predict_labels(const ModelParams& params, const NetworkView& view,
                                const NetInputSpec& spec) {
  const Pixmap* pages[] = {&view.small};
  const Tensor4 logits =
      forward(params, to_input_tensor(pages, params.input_mean, params.input_std, spec));
  if (!logits.all_finite()) throw NumericError("network produced non-finite logits");
  return from_network_labels(argmax_labels(logits, 0, spec.width, spec.height), view);
}

inline LabelMask predict_labels(const ModelParams& params, const Pixmap& page,
                                const NetInputSpec& spec) {
  return predict_labels(params, to_network_view(page, spec), spec);
}

}  // namespace folioseg
