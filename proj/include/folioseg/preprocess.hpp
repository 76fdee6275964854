#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/image.hpp"

namespace folioseg {

/// Canvas aspect ratio as width/height, kept rational so padding is exact.
struct Ratio {
  long num = 2;
  long den = 3;
};

/// Network input geometry. The defaults reproduce the 260x390 page at
/// ratio 2/3; inputs are padded to a multiple of `divisor` internally.
struct NetInputSpec {
  int width = 260;
  int height = 390;
  Ratio ratio{2, 3};
  int divisor = 4;

  int padded_width() const { return (width + divisor - 1) / divisor * divisor; }
  int padded_height() const { return (height + divisor - 1) / divisor * divisor; }

  void validate() const {
    if (ratio.num <= 0 || ratio.den <= 0) throw DataError("canvas ratio must be positive");
    if (divisor < 1) throw DataError("pad divisor must be >= 1");
    if (width < divisor || height < divisor)
      throw DataError("network input must be at least " + std::to_string(divisor) +
                      " pixels on each side");
  }
};

struct Placement {
  int x = 0;
  int y = 0;
  int canvas_width = 0;
  int canvas_height = 0;
};

template <typename Image>
struct Fitted {
  Image image;
  Placement placement;
};

/// Canvas size for fitting a width x height page at `ratio`, growing the
/// short axis (rounded up) and never cropping.
inline Placement ratio_placement(int width, int height, Ratio ratio) {
  if (ratio.num <= 0 || ratio.den <= 0) throw DataError("canvas ratio must be positive");
  Placement p;
  const long w = width, h = height;
  if (w * ratio.den < h * ratio.num) {
    p.canvas_width = int((h * ratio.num + ratio.den - 1) / ratio.den);
    p.canvas_height = height;
  } else {
    p.canvas_width = width;
    p.canvas_height = int((w * ratio.den + ratio.num - 1) / ratio.num);
  }
  p.x = (p.canvas_width - width) / 2;
  p.y = (p.canvas_height - height) / 2;
  return p;
}

namespace detail {

template <typename Image>
Image blank_like(const Image& src, int w, int h, std::uint8_t fill) {
  if constexpr (std::is_same_v<Image, Pixmap>) {
    return Pixmap(w, h, src.channels(), fill);
  } else {
    return Image(w, h, fill);
  }
}

template <typename Image>
int channels_of(const Image& img) {
  if constexpr (std::is_same_v<Image, Pixmap>) return img.channels();
  else return 1;
}

template <typename Image>
std::uint8_t* raw(Image& img) { return img.data().data(); }
template <typename Image>
const std::uint8_t* raw(const Image& img) { return img.data().data(); }

}  // namespace detail

/// Centers `img` on a `fill`-colored canvas of the given ratio.
template <typename Image>
Fitted<Image> fit_to_ratio(const Image& img, Ratio ratio, std::uint8_t fill) {
  const Placement p = ratio_placement(img.width(), img.height(), ratio);
  Image out = detail::blank_like(img, p.canvas_width, p.canvas_height, fill);
  const int ch = detail::channels_of(img);
  const size_t row = size_t(img.width()) * size_t(ch);
  for (int y = 0; y < img.height(); ++y) {
    const auto* src = detail::raw(img) + size_t(y) * row;
    auto* dst = detail::raw(out) + (size_t(y + p.y) * size_t(p.canvas_width) + size_t(p.x)) * size_t(ch);
    std::copy(src, src + row, dst);
  }
  return {std::move(out), p};
}

/// Inverse of fit_to_ratio's placement: cuts the original page back out.
template <typename Image>
Image crop(const Image& img, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > img.width() || y0 + height > img.height())
    throw DataError("crop window outside image");
  Image out = detail::blank_like(img, width, height, 0);
  const int ch = detail::channels_of(img);
  const size_t row = size_t(width) * size_t(ch);
  for (int y = 0; y < height; ++y) {
    const auto* src =
        detail::raw(img) + (size_t(y + y0) * size_t(img.width()) + size_t(x0)) * size_t(ch);
    std::copy(src, src + row, detail::raw(out) + size_t(y) * row);
  }
  return out;
}

enum class ResizeMode { area, nearest };

namespace detail {

// Round-half-to-even of num/den for non-negative integers.
inline std::int64_t div_round_even(std::int64_t num, std::int64_t den) {
  const std::int64_t q = num / den, r = num % den;
  if (2 * r > den || (2 * r == den && (q & 1))) return q + 1;
  return q;
}

inline Pixmap resize_area(const Pixmap& img, int w, int h) {
  // Source pixel i spans [i*w, (i+1)*w) and target pixel j spans
  // [j*sw, (j+1)*sw) on a common integer axis, so overlaps are exact.
  const std::int64_t sw = img.width(), sh = img.height();
  struct Span { int src; std::int64_t weight; };
  auto spans = [](std::int64_t src_len, std::int64_t dst_len) {
    std::vector<std::vector<Span>> out(static_cast<size_t>(dst_len));
    for (std::int64_t j = 0; j < dst_len; ++j) {
      const std::int64_t lo = j * src_len, hi = (j + 1) * src_len;
      for (std::int64_t i = lo / dst_len; i < src_len && i * dst_len < hi; ++i) {
        const std::int64_t a = std::max(lo, i * dst_len), b = std::min(hi, (i + 1) * dst_len);
        if (b > a) out[size_t(j)].push_back({int(i), b - a});
      }
    }
    return out;
  };
  const auto xs = spans(sw, w), ys = spans(sh, h);
  const std::int64_t area = sw * sh;
  Pixmap out(w, h, img.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c) {
        std::int64_t acc = 0;
        for (const auto& sy : ys[size_t(y)])
          for (const auto& sx : xs[size_t(x)])
            acc += sy.weight * sx.weight * img.at(sx.src, sy.src, c);
        out.at(x, y, c) = std::uint8_t(div_round_even(acc, area));
      }
  return out;
}

template <typename Image>
Image resize_nearest(const Image& img, int w, int h) {
  Image out = blank_like(img, w, h, 0);
  const int ch = channels_of(img);
  std::vector<int> xs(static_cast<size_t>(w)), ys(static_cast<size_t>(h));
  // Sample at target pixel centers: src = floor((j + 1/2) * src_len / dst_len).
  for (int x = 0; x < w; ++x) xs[size_t(x)] = int((2 * std::int64_t(x) + 1) * img.width() / (2 * std::int64_t(w)));
  for (int y = 0; y < h; ++y) ys[size_t(y)] = int((2 * std::int64_t(y) + 1) * img.height() / (2 * std::int64_t(h)));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        raw(out)[(size_t(y) * size_t(w) + size_t(x)) * size_t(ch) + size_t(c)] =
            raw(img)[(size_t(ys[size_t(y)]) * size_t(img.width()) + size_t(xs[size_t(x)])) *
                         size_t(ch) + size_t(c)];
  return out;
}

}  // namespace detail

/// Area averaging is only defined for intensity images; masks are
/// categorical and must use nearest-neighbor.
template <typename Image>
Image resize(const Image& img, int w, int h, ResizeMode mode) {
  if (w < 1 || h < 1) throw DataError("resize target must be at least 1x1");
  if (mode == ResizeMode::area) {
    if constexpr (std::is_same_v<Image, Pixmap>) {
      return detail::resize_area(img, w, h);
    } else {
      throw DataError("area-average resize is undefined for categorical masks");
    }
  }
  return detail::resize_nearest(img, w, h);
}

/// Rec. 601 luma, rounded half-to-even from integer weights.
inline Pixmap to_grayscale(const Pixmap& img) {
  if (img.channels() == 1) return img;
  Pixmap out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const std::int64_t v =
          299 * img.at(x, y, 0) + 587 * img.at(x, y, 1) + 114 * img.at(x, y, 2);
      out.at(x, y) = std::uint8_t(detail::div_round_even(v, 1000));
    }
  return out;
}

struct Binarization {
  BinaryMask mask;
  int threshold = 0;
  bool no_ink = false;  // constant image; mask is all background
};

/// Between-class variance of the split {v <= t} / {v > t}, scaled by
/// total^2 so it can be compared exactly in integer-derived doubles.
inline double otsu_between_class(const std::array<std::int64_t, 256>& hist, int t) {
  std::int64_t n0 = 0, s0 = 0, n = 0, s = 0;
  for (int v = 0; v < 256; ++v) {
    n += hist[size_t(v)];
    s += std::int64_t(v) * hist[size_t(v)];
    if (v <= t) {
      n0 += hist[size_t(v)];
      s0 += std::int64_t(v) * hist[size_t(v)];
    }
  }
  const std::int64_t n1 = n - n0, s1 = s - s0;
  if (n0 == 0 || n1 == 0) return 0.0;
  // n0*n1*(m0-m1)^2 = (s0*n1 - s1*n0)^2 / (n0*n1)
  const double d = double(s0) * double(n1) - double(s1) * double(n0);
  return d * d / (double(n0) * double(n1));
}

/// Global Otsu threshold: foreground = samples <= T, T the smallest
/// maximizer of between-class variance.
inline Binarization binarize_otsu(const Pixmap& img) {
  if (img.channels() != 1) throw DataError("binarize_otsu expects a grayscale image");
  std::array<std::int64_t, 256> hist{};
  for (auto v : img.data()) ++hist[v];

  Binarization result;
  result.mask = BinaryMask(img.width(), img.height());
  int best_t = -1;
  double best = 0.0;
  for (int t = 0; t < 255; ++t) {
    const double score = otsu_between_class(hist, t);
    if (score > best) {
      best = score;
      best_t = t;
    }
  }
  if (best_t < 0) {
    result.no_ink = true;
    result.threshold = -1;
    return result;
  }
  result.threshold = best_t;
  for (size_t i = 0; i < result.mask.size(); ++i)
    result.mask[i] = img.data()[i] <= best_t ? 1 : 0;
  return result;
}

/// Training target: ground truth on ink, ignored background elsewhere.
inline LabelMask make_target(const LabelMask& gt, const BinaryMask& bin) {
  require_same_dims(gt, bin.width(), bin.height(), "make_target");
  LabelMask out(gt.width(), gt.height());
  for (size_t i = 0; i < gt.size(); ++i) out[i] = bin[i] ? gt[i] : 0;
  return out;
}

}  // namespace folioseg
