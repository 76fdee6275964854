#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/image.hpp"

namespace folioseg {

/// Keeps predicted labels on ink pixels, zeroes the background.
inline LabelMask apply_bitmask(const LabelMask& pred, const BinaryMask& bin) {
  require_same_dims(pred, bin.width(), bin.height(), "apply_bitmask");
  LabelMask out(pred.width(), pred.height());
  for (size_t i = 0; i < pred.size(); ++i) out[i] = bin[i] ? pred[i] : 0;
  return out;
}

enum class Connectivity { four = 4, eight = 8 };

struct ComponentSet {
  static constexpr std::int32_t background = -1;

  int width = 0;
  int height = 0;
  /// Dense component id per pixel, or `background`.
  std::vector<std::int32_t> ids;
  /// Flat pixel indices of each component in raster order.
  std::vector<std::vector<std::uint32_t>> pixels;

  size_t count() const noexcept { return pixels.size(); }
};

namespace detail {

class DisjointSets {
 public:
  std::int32_t make() {
    parent_.push_back(std::int32_t(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[size_t(x)] != x) {
      parent_[size_t(x)] = parent_[size_t(parent_[size_t(x)])];
      x = parent_[size_t(x)];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[size_t(b)] = a;
    else parent_[size_t(a)] = b;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace detail

/// Two-pass union-find labeling. Ids are assigned in raster order of each
/// component's first pixel.
inline ComponentSet connected_components(const BinaryMask& bin,
                                         Connectivity conn = Connectivity::eight) {
  const int w = bin.width(), h = bin.height();
  ComponentSet cs;
  cs.width = w;
  cs.height = h;
  cs.ids.assign(bin.size(), ComponentSet::background);

  detail::DisjointSets sets;
  std::vector<std::int32_t> provisional(bin.size(), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = size_t(y) * size_t(w) + size_t(x);
      if (!bin[i]) continue;
      std::int32_t label = -1;
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const std::int32_t n = provisional[size_t(ny) * size_t(w) + size_t(nx)];
        if (n < 0) return;
        if (label < 0) label = n;
        else sets.unite(label, n);
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (conn == Connectivity::eight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      provisional[i] = label < 0 ? sets.make() : label;
    }
  }

  std::vector<std::int32_t> dense;
  for (size_t i = 0; i < bin.size(); ++i) {
    if (provisional[i] < 0) continue;
    const std::int32_t root = sets.find(provisional[i]);
    if (size_t(root) >= dense.size()) dense.resize(size_t(root) + 1, -1);
    if (dense[size_t(root)] < 0) {
      dense[size_t(root)] = std::int32_t(cs.pixels.size());
      cs.pixels.emplace_back();
    }
    cs.ids[i] = dense[size_t(root)];
    cs.pixels[size_t(cs.ids[i])].push_back(std::uint32_t(i));
  }
  return cs;
}

/// Every component takes its most frequent non-zero label (smallest label
/// on ties). Pixels outside components, and components whose pixels are
/// all 0, are left as they are.
inline LabelMask mode_relabel(const LabelMask& pred, const ComponentSet& comps) {
  require_same_dims(pred, comps.width, comps.height, "mode_relabel");
  LabelMask out = pred;
  std::vector<size_t> votes(256);
  for (const auto& comp : comps.pixels) {
    std::fill(votes.begin(), votes.end(), 0);
    for (auto p : comp) ++votes[pred[p]];
    int best = 0;
    for (int l = 1; l < 256; ++l)
      if (votes[size_t(l)] > votes[size_t(best)] || (best == 0 && votes[size_t(l)] > 0)) best = l;
    if (best == 0) continue;
    for (auto p : comp) out[p] = std::uint8_t(best);
  }
  return out;
}

/// bitmask, then component mode voting at the same resolution.
inline LabelMask postprocess(const LabelMask& pred, const BinaryMask& bin,
                             Connectivity conn = Connectivity::eight) {
  return mode_relabel(apply_bitmask(pred, bin), connected_components(bin, conn));
}

}  // namespace folioseg
