#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "folioseg/error.hpp"
#include "folioseg/palette.hpp"

namespace folioseg {

enum class Split { unsplit, train, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "unsplit";
  }
}

struct ManifestRecord {
  std::filesystem::path image;
  std::filesystem::path ground_truth;
  Split split = Split::unsplit;
};

struct DatasetManifest {
  std::string name;
  LabelPalette classes;
  std::vector<ManifestRecord> records;

  int class_count() const noexcept { return classes.class_count(); }

  bool fully_tagged() const {
    for (const auto& r : records)
      if (r.split == Split::unsplit) return false;
    return true;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Rgb parse_hex_color(const std::string& s, const std::string& where) {
  std::string hex = s;
  if (!hex.empty() && hex[0] == '#') hex.erase(0, 1);
  if (hex.size() != 6 || hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw DataError(where + ": bad color '" + s + "', expected rrggbb hex");
  const auto byte = [&](size_t i) { return std::uint8_t(std::stoi(hex.substr(i, 2), nullptr, 16)); };
  return {byte(0), byte(2), byte(4)};
}

}  // namespace detail

/// Parses manifest text. Relative paths are resolved against base_dir.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                      const std::string& source = "<manifest>") {
  DatasetManifest m;
  std::vector<LabelPalette::Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);

    std::istringstream ls(line);
    std::string directive;
    ls >> directive;
    if (directive == "name") {
      std::string rest;
      std::getline(ls, rest);
      m.name = detail::trim(rest);
    } else if (directive == "class") {
      std::string index, color, name;
      ls >> index >> color;
      std::getline(ls, name);
      if (index.empty() || color.empty())
        throw DataError(where + ": expected 'class <index> <rrggbb> <name>'");
      int idx = 0;
      try {
        size_t used = 0;
        idx = std::stoi(index, &used);
        if (used != index.size()) throw std::invalid_argument(index);
      } catch (const std::exception&) {
        throw DataError(where + ": bad class index '" + index + "'");
      }
      if (idx < 1) throw DataError(where + ": class index must be >= 1");
      for (const auto& e : entries)
        if (e.index == idx) throw DataError(where + ": duplicate class index " + index);
      entries.push_back({idx, detail::parse_hex_color(color, where), detail::trim(name)});
    } else if (directive == "record") {
      std::string image, gt, tag, extra;
      ls >> image >> gt >> tag >> extra;
      if (image.empty() || gt.empty())
        throw DataError(where + ": expected 'record <image-path> <gt-path> [train|test]'");
      if (!extra.empty()) throw DataError(where + ": trailing text after record");
      ManifestRecord r;
      r.image = base_dir / image;
      r.ground_truth = base_dir / gt;
      if (tag.empty() || tag == "unsplit") r.split = Split::unsplit;
      else if (tag == "train") r.split = Split::train;
      else if (tag == "test") r.split = Split::test;
      else throw DataError(where + ": split tag must be train or test, got '" + tag + "'");
      m.records.push_back(std::move(r));
    } else {
      throw DataError(where + ": unknown directive '" + directive + "'");
    }
  }

  if (entries.empty()) throw DataError(source + ": manifest declares no classes");
  m.classes = LabelPalette(std::move(entries));
  if (m.records.empty()) throw DataError(source + ": manifest has no records");

  std::set<std::filesystem::path> seen;
  for (const auto& r : m.records) {
    for (const auto& p : {r.image, r.ground_truth}) {
      if (!seen.insert(p.lexically_normal()).second)
        throw DataError(source + ": path listed twice: " + p.string());
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

/// Eager existence check of every referenced file (the `--check` mode).
inline void check_manifest_paths(const DatasetManifest& m) {
  for (const auto& r : m.records)
    for (const auto& p : {r.image, r.ground_truth})
      if (!std::filesystem::is_regular_file(p))
        throw DataError("manifest references missing file " + p.string());
}

inline void write_manifest(std::ostream& out, const DatasetManifest& m,
                           const std::filesystem::path& base_dir) {
  if (!m.name.empty()) out << "name " << m.name << "\n";
  for (const auto& e : m.classes.entries())
    out << "class " << e.index << " " << to_hex(e.color) << " " << e.name << "\n";
  for (const auto& r : m.records) {
    out << "record " << r.image.lexically_relative(base_dir).generic_string() << " "
        << r.ground_truth.lexically_relative(base_dir).generic_string();
    if (r.split != Split::unsplit) out << " " << to_string(r.split);
    out << "\n";
  }
}

}  // namespace folioseg
