#pragma once

// NetPBM (P2/P3/P5/P6) reading and writing, optional PNG, and conversion
// between palette-colored ground-truth images and label masks.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#ifdef FOLIOSEG_HAVE_PNG
#include <png.h>
#endif

#include "folioseg/error.hpp"
#include "folioseg/image.hpp"
#include "folioseg/palette.hpp"

namespace folioseg {

namespace detail {

class PnmCursor {
 public:
  PnmCursor(const std::vector<std::uint8_t>& bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ >= bytes_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(name_ + ": " + msg + " at byte offset " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    if (at_end()) fail(std::string("unexpected end of data reading ") + what);
    if (!std::isdigit(bytes_[pos_])) fail(std::string("expected integer for ") + what);
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) fail(std::string("value too large for ") + what);
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from binary samples.
  void single_whitespace() {
    if (at_end() || !std::isspace(bytes_[pos_])) fail("expected whitespace after header");
    ++pos_;
  }

  std::uint8_t byte() {
    if (at_end()) fail("truncated sample data");
    return bytes_[pos_++];
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

#ifdef FOLIOSEG_HAVE_PNG
inline Pixmap decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw DataError(name + ": " + image.message);
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw DataError(name + ": unsupported bit depth (16-bit PNG)");
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw DataError(name + ": PNG with alpha channel is not supported");
  }
  const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError(name + ": " + msg);
  }
  return Pixmap(int(image.width), int(image.height), channels, std::move(data));
}
#endif

}  // namespace detail

/// Decodes an in-memory NetPBM (P2, P3, P5, P6) or PNG image.
inline Pixmap decode_pixmap(const std::vector<std::uint8_t>& bytes,
                            const std::string& name = "<memory>") {
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
      bytes[3] == 'G') {
#ifdef FOLIOSEG_HAVE_PNG
    return detail::decode_png(bytes, name);
#else
    throw DataError(name + ": PNG support was not compiled in");
#endif
  }

  detail::PnmCursor cur(bytes, name);
  if (bytes.size() < 2 || bytes[0] != 'P') cur.fail("not a NetPBM or PNG file");
  const char kind = char(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    cur.fail(std::string("unsupported NetPBM variant P") + kind);
  cur.byte();
  cur.byte();

  const long width = cur.read_uint("width");
  const long height = cur.read_uint("height");
  const long maxval = cur.read_uint("maxval");
  if (width < 1 || height < 1) cur.fail("image dimensions must be positive");
  if (maxval < 1) cur.fail("maxval must be positive");
  if (maxval > 255)
    cur.fail("unsupported bit depth (maxval " + std::to_string(maxval) + " exceeds 255)");

  const int channels = (kind == '3' || kind == '6') ? 3 : 1;
  const size_t count = size_t(width) * size_t(height) * size_t(channels);
  std::vector<std::uint8_t> data(count);

  if (kind == '5' || kind == '6') {
    cur.single_whitespace();
    for (size_t i = 0; i < count; ++i) data[i] = cur.byte();
  } else {
    for (size_t i = 0; i < count; ++i) {
      const long v = cur.read_uint("sample");
      if (v > maxval) cur.fail("sample exceeds maxval");
      data[i] = std::uint8_t(v);
    }
  }
  return Pixmap(int(width), int(height), channels, std::move(data));
}

inline Pixmap read_pixmap(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());
  return decode_pixmap(detail::read_file_bytes(path), path.string());
}

enum class PnmEncoding { binary, ascii };

inline std::vector<std::uint8_t> encode_pnm(const Pixmap& img,
                                            PnmEncoding enc = PnmEncoding::binary) {
  const bool rgb = img.channels() == 3;
  const char* magic = enc == PnmEncoding::binary ? (rgb ? "P6" : "P5") : (rgb ? "P3" : "P2");
  const std::string header = std::string(magic) + "\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  if (enc == PnmEncoding::binary) {
    out.insert(out.end(), img.data().begin(), img.data().end());
  } else {
    const size_t per_row = size_t(img.width()) * size_t(img.channels());
    size_t i = 0;
    for (auto v : img.data()) {
      const auto s = std::to_string(v);
      out.insert(out.end(), s.begin(), s.end());
      out.push_back(++i % per_row == 0 ? '\n' : ' ');
    }
  }
  return out;
}

/// Writes NetPBM (P5/P6, or P2/P3 when ascii is requested). A `.png`
/// extension selects PNG when support is compiled in.
inline void write_pixmap(const std::filesystem::path& path, const Pixmap& img,
                         PnmEncoding enc = PnmEncoding::binary) {
  if (path.extension() == ".png") {
#ifdef FOLIOSEG_HAVE_PNG
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width());
    image.height = png_uint_32(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data().data(), 0,
                                 nullptr))
      throw DataError("cannot write " + path.string() + ": " + image.message);
    return;
#else
    throw DataError("PNG support was not compiled in: " + path.string());
#endif
  }
  const auto bytes = encode_pnm(img, enc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

/// Exact color lookup; grayscale images are read as gray RGB triples.
inline LabelMask decode_label_mask(const Pixmap& img, const LabelPalette& palette) {
  LabelMask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      Rgb c;
      if (img.channels() == 3) {
        c = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
      } else {
        c = {img.at(x, y), img.at(x, y), img.at(x, y)};
      }
      const auto label = palette.label_of(c);
      if (!label)
        throw DataError("ground-truth color #" + to_hex(c) + " at (" + std::to_string(x) +
                        ", " + std::to_string(y) + ") is not in the palette");
      mask.at(x, y) = std::uint8_t(*label);
    }
  }
  return mask;
}

inline Pixmap encode_label_mask(const LabelMask& mask, const LabelPalette& palette) {
  Pixmap img(mask.width(), mask.height(), 3);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const Rgb c = palette.color_of(mask.at(x, y));
      img.at(x, y, 0) = c.r;
      img.at(x, y, 1) = c.g;
      img.at(x, y, 2) = c.b;
    }
  }
  return img;
}

/// Foreground masks are stored as grayscale with ink = 0, background = 255.
inline Pixmap binary_to_pixmap(const BinaryMask& bin) {
  Pixmap img(bin.width(), bin.height(), 1);
  for (size_t i = 0; i < bin.size(); ++i) img.data()[i] = bin[i] ? 0 : 255;
  return img;
}

}  // namespace folioseg
