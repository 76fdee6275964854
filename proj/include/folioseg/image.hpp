#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "folioseg/error.hpp"

namespace folioseg {

/// 8-bit raster, grayscale (1 channel) or interleaved RGB (3 channels).
class Pixmap {
 public:
  Pixmap() = default;

  Pixmap(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    check_dims(width, height, channels);
    data_.assign(size_t(width) * size_t(height) * size_t(channels), fill);
  }

  Pixmap(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_dims(width, height, channels);
    if (data_.size() != size_t(width) * size_t(height) * size_t(channels))
      throw DataError("pixmap data length " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(width) + "x" +
                      std::to_string(height) + "x" + std::to_string(channels));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(size_t(y) * size_t(width_) + size_t(x)) * size_t(channels_) + size_t(c)];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(size_t(y) * size_t(width_) + size_t(x)) * size_t(channels_) + size_t(c)];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const Pixmap&, const Pixmap&) = default;

 private:
  static void check_dims(int width, int height, int channels) {
    if (width < 1 || height < 1)
      throw DataError("pixmap dimensions must be positive, got " + std::to_string(width) +
                      "x" + std::to_string(height));
    if (channels != 1 && channels != 3)
      throw DataError("pixmap must have 1 or 3 channels, got " + std::to_string(channels));
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel per-pixel raster. The tag keeps label masks and
/// foreground masks from being mixed up.
template <typename Tag>
class Plane {
 public:
  using value_type = std::uint8_t;

  Plane() = default;

  Plane(int width, int height, value_type fill = 0) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw DataError("plane dimensions must be positive, got " + std::to_string(width) +
                      "x" + std::to_string(height));
    data_.assign(size_t(width) * size_t(height), fill);
  }

  Plane(int width, int height, std::vector<value_type> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 || data_.size() != size_t(width) * size_t(height))
      throw DataError("plane data does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  size_t size() const noexcept { return data_.size(); }

  value_type& at(int x, int y) { return data_[size_t(y) * size_t(width_) + size_t(x)]; }
  value_type at(int x, int y) const { return data_[size_t(y) * size_t(width_) + size_t(x)]; }

  value_type& operator[](size_t i) { return data_[i]; }
  value_type operator[](size_t i) const { return data_[i]; }

  std::span<value_type> data() noexcept { return data_; }
  std::span<const value_type> data() const noexcept { return data_; }

  bool same_dims(int width, int height) const noexcept {
    return width_ == width && height_ == height;
  }
  template <typename Other>
  bool same_dims(const Other& o) const noexcept {
    return same_dims(o.width(), o.height());
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<value_type> data_;
};

struct LabelTag {};
struct ForegroundTag {};

/// Class index per pixel; 0 is the ignored background.
using LabelMask = Plane<LabelTag>;
/// 1 = ink (foreground), 0 = background.
using BinaryMask = Plane<ForegroundTag>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline std::string to_hex(Rgb c) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(6, '0');
  const std::uint8_t v[3] = {c.r, c.g, c.b};
  for (int i = 0; i < 3; ++i) {
    s[size_t(2 * i)] = digits[v[i] >> 4];
    s[size_t(2 * i + 1)] = digits[v[i] & 15];
  }
  return s;
}

template <typename Tag>
void require_same_dims(const Plane<Tag>& a, int width, int height, const std::string& what) {
  if (!a.same_dims(width, height))
    throw DataError(what + ": dimension mismatch " + std::to_string(a.width()) +
                    "x" + std::to_string(a.height()) + " vs " + std::to_string(width) + "x" +
                    std::to_string(height));
}

}  // namespace folioseg
