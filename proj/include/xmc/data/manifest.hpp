#pragma once

#include <xmc/box.hpp>
#include <xmc/error.hpp>
#include <xmc/data/ppm.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace xmc::data {

struct GoldBox {
  std::string label;
  BoundingBox box;
  friend bool operator==(const GoldBox&, const GoldBox&) = default;
};

struct MultimodalSample {
  std::string split;       // "train" / "test"
  std::string image_path;  // as written in the manifest (relative to it)
  std::string caption;
  std::vector<std::string> classes;
  std::vector<GoldBox> boxes;

  friend bool operator==(const MultimodalSample&, const MultimodalSample&) = default;
};

// One line per sample, tab separated:
//   split  image_path  caption  class,class,...  class:x0:y0:x1:y1;...
inline std::string format_manifest_line(const MultimodalSample& s) {
  std::string line = s.split + '\t' + s.image_path + '\t' + s.caption + '\t';
  for (std::size_t i = 0; i < s.classes.size(); ++i) line += (i ? "," : "") + s.classes[i];
  line += '\t';
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const auto& b = s.boxes[i];
    line += (i ? ";" : "") + b.label + ':' + std::to_string(b.box.x_min) + ':' + std::to_string(b.box.y_min) + ':' +
            std::to_string(b.box.x_max) + ':' + std::to_string(b.box.y_max);
  }
  return line;
}

inline void write_manifest(const std::vector<MultimodalSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& s : samples) out << format_manifest_line(s) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

inline int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw FormatError(where + ": invalid integer '" + s + "'");
  return v;
}

}  // namespace detail

struct ManifestOptions {
  std::size_t image_size = 64;
  bool check_images = true;  // require every referenced image file to exist
};

// Parses and validates a manifest; image paths are resolved against the
// manifest's directory when checking existence.
inline std::vector<MultimodalSample> load_manifest(const std::string& path, const ManifestOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const auto root = std::filesystem::path(path).parent_path();
  std::vector<MultimodalSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "manifest '" + path + "' sample " + std::to_string(samples.size()) + " (line " +
                              std::to_string(line_no) + ")";
    auto fields = detail::split(line, '\t');
    if (fields.size() != 5) throw FormatError(where + ": expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    MultimodalSample s;
    s.split = fields[0];
    s.image_path = fields[1];
    s.caption = fields[2];
    s.classes = detail::split(fields[3], ',');
    if (s.split.empty() || s.image_path.empty()) throw FormatError(where + ": empty split or image path");
    for (const auto& b : detail::split(fields[4], ';')) {
      const auto parts = detail::split(b, ':');
      if (parts.size() != 5) throw FormatError(where + ": malformed box '" + b + "'");
      GoldBox g{parts[0], {detail::parse_int(parts[1], where), detail::parse_int(parts[2], where),
                           detail::parse_int(parts[3], where), detail::parse_int(parts[4], where)}};
      const int sz = static_cast<int>(opt.image_size);
      if (!g.box.within(sz, sz)) throw FormatError(where + ": box '" + b + "' out of image bounds");
      s.boxes.push_back(std::move(g));
    }
    const std::set<std::string> boxed = [&] {
      std::set<std::string> out;
      for (const auto& b : s.boxes) out.insert(b.label);
      return out;
    }();
    for (const auto& c : s.classes)
      if (!boxed.count(c)) throw FormatError(where + ": gold class '" + c + "' has no box");
    if (opt.check_images && !std::filesystem::exists(root / s.image_path))
      throw IoError(where + ": missing image '" + (root / s.image_path).string() + "'");
    samples.push_back(std::move(s));
  }
  return samples;
}

inline std::string resolve_image(const std::string& manifest_path, const MultimodalSample& s) {
  return (std::filesystem::path(manifest_path).parent_path() / s.image_path).string();
}

}  // namespace xmc::data
