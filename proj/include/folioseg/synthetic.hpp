#pragma once

// Procedurally generated pages: rows of dark glyph strokes inside three
// kinds of layout regions (running text, marginalia, heading). Every
// glyph lies strictly inside its region, so no connected component spans
// two classes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "folioseg/image.hpp"
#include "folioseg/manifest.hpp"
#include "folioseg/palette.hpp"
#include "folioseg/pixmap_io.hpp"
#include "folioseg/random.hpp"

namespace folioseg {

struct SyntheticPage {
  Pixmap image;  // grayscale
  LabelMask gt;  // region labels, 0 outside regions
};

inline LabelPalette synthetic_palette() {
  return LabelPalette({{1, {255, 0, 0}, "running text"},
                       {2, {0, 255, 0}, "marginalia"},
                       {3, {0, 0, 255}, "heading"}});
}

namespace detail {

struct Box {
  int x0, y0, x1, y1;  // half-open
};

inline void fill_glyph_rows(Pixmap& img, const Box& region, Rng& rng, int glyph_h, int row_gap,
                            double density) {
  // Leave a one pixel margin inside the region.
  for (int y = region.y0 + 1; y + glyph_h <= region.y1 - 1; y += glyph_h + row_gap) {
    int x = region.x0 + 1 + rng.range(0, 1);
    while (true) {
      const int gw = rng.range(1, 3);
      if (x + gw > region.x1 - 1) break;
      if (rng.uniform() < density) {
        const std::uint8_t ink = std::uint8_t(rng.range(10, 60));
        const int top = y + rng.range(0, 1);
        const int bottom = y + glyph_h - rng.range(0, 1);
        for (int yy = top; yy < bottom; ++yy)
          for (int xx = x; xx < x + gw; ++xx) img.at(xx, yy) = ink;
      }
      x += gw + rng.range(1, 2);
    }
  }
}

inline void paint_region(LabelMask& gt, const Box& b, std::uint8_t label) {
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x) gt.at(x, y) = label;
}

}  // namespace detail

/// width x height page; layout proportions are jittered per seed.
inline SyntheticPage make_synthetic_page(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticPage p{Pixmap(width, height, 1, 255), LabelMask(width, height)};
  for (auto& v : p.image.data()) v = std::uint8_t(rng.range(225, 255));

  auto jitter = [&](double frac, int spread) {
    return int(frac * width) + rng.range(-spread, spread);
  };
  auto jitter_y = [&](double frac, int spread) {
    return int(frac * height) + rng.range(-spread, spread);
  };
  const int sx = std::max(1, width / 64), sy = std::max(1, height / 96);

  const detail::Box heading{jitter(0.30, sx), jitter_y(0.04, sy), jitter(0.88, sx),
                            jitter_y(0.13, sy)};
  const detail::Box text{jitter(0.30, sx), jitter_y(0.19, sy), jitter(0.92, sx),
                         jitter_y(0.92, 2 * sy)};
  const detail::Box margin{jitter(0.05, sx), jitter_y(0.30, 3 * sy), jitter(0.22, sx),
                           jitter_y(0.70, 3 * sy)};

  detail::fill_glyph_rows(p.image, heading, rng, std::max(4, height / 20), 2, 0.8);
  detail::fill_glyph_rows(p.image, text, rng, std::max(3, height / 40), 2, 0.75);
  detail::fill_glyph_rows(p.image, margin, rng, std::max(2, height / 60), 3, 0.6);

  detail::paint_region(p.gt, text, 1);
  detail::paint_region(p.gt, margin, 2);
  detail::paint_region(p.gt, heading, 3);
  return p;
}

/// Writes `count` pages (PGM images, PPM ground truth) and a manifest.
/// If train_count > 0 the first train_count records are tagged train and
/// the rest test. Returns the manifest path.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, int count,
                                                     int width, int height, std::uint64_t seed,
                                                     int train_count = 0) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.name = "synthetic";
  m.classes = synthetic_palette();
  for (int i = 0; i < count; ++i) {
    const auto page = make_synthetic_page(width, height, derive_seed(seed, {std::uint64_t(i)}));
    const std::string stem = "page" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") +
                             std::to_string(i);
    const auto img = dir / (stem + ".pgm");
    const auto gt = dir / (stem + "_gt.ppm");
    write_pixmap(img, page.image);
    write_pixmap(gt, encode_label_mask(page.gt, m.classes));
    Split split = Split::unsplit;
    if (train_count > 0) split = i < train_count ? Split::train : Split::test;
    m.records.push_back({img, gt, split});
  }
  const auto path = dir / "manifest.txt";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_manifest(out, m, dir);
  return path;
}

}  // namespace folioseg
