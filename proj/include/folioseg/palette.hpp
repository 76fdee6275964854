#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/image.hpp"

namespace folioseg {

/// Maps ground-truth colors to class indices 1..=C. Class 0 is always black.
class LabelPalette {
 public:
  struct Entry {
    int index = 0;
    Rgb color;
    std::string name;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  static constexpr int max_classes = 6;

  LabelPalette() = default;

  explicit LabelPalette(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.index < b.index; });
    validate();
  }

  int class_count() const noexcept { return int(entries_.size()); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  Rgb color_of(int label) const {
    if (label == 0) return Rgb{};
    if (label < 0 || label > class_count())
      throw DataError("label " + std::to_string(label) + " is outside palette range 0.." +
                      std::to_string(class_count()));
    return entries_[size_t(label - 1)].color;
  }

  std::optional<int> label_of(Rgb color) const {
    if (color == Rgb{}) return 0;
    for (const auto& e : entries_)
      if (e.color == color) return e.index;
    return std::nullopt;
  }

  friend bool operator==(const LabelPalette&, const LabelPalette&) = default;

 private:
  void validate() const {
    if (entries_.empty()) throw DataError("palette has no classes");
    if (class_count() > max_classes)
      throw DataError("palette has " + std::to_string(class_count()) + " classes, at most " +
                      std::to_string(max_classes) + " supported");
    for (size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (i > 0 && entries_[i - 1].index == e.index)
        throw DataError("duplicate class index " + std::to_string(e.index));
      if (e.index != int(i) + 1)
        throw DataError("class indices must be contiguous from 1, missing " +
                        std::to_string(i + 1));
      if (e.color == Rgb{})
        throw DataError("class " + std::to_string(e.index) +
                        " uses black, which is reserved for background");
      for (size_t j = 0; j < i; ++j)
        if (entries_[j].color == e.color)
          throw DataError("classes " + std::to_string(entries_[j].index) + " and " +
                          std::to_string(e.index) + " share color #" + to_hex(e.color));
    }
  }

  std::vector<Entry> entries_;
};

}  // namespace folioseg
