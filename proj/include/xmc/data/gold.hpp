#pragma once

#include <xmc/error.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace xmc::data {

using Taxonomy = std::map<std::string, std::string>;                                 // word -> category
using AssociationTable = std::map<std::pair<std::string, std::string>, double>;      // (cue, response) -> strength
using ConcretenessRatings = std::map<std::string, double>;                           // word -> rating

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv(const std::string& path, std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto p = line.find('\t', start);
      f.push_back(line.substr(start, p == std::string::npos ? std::string::npos : p - start));
      if (p == std::string::npos) break;
      start = p + 1;
    }
    if (f.size() != columns)
      throw FormatError(path + " line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                        " columns, got " + std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

inline double parse_number(const std::string& s, const std::string& where) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw FormatError(where + ": invalid number '" + s + "'");
  return v;
}

}  // namespace detail

inline Taxonomy load_taxonomy(const std::string& path) {
  Taxonomy t;
  for (auto& r : detail::read_tsv(path, 2)) t[r[0]] = r[1];
  return t;
}

inline AssociationTable load_association(const std::string& path) {
  AssociationTable t;
  for (auto& r : detail::read_tsv(path, 3)) {
    const double v = detail::parse_number(r[2], path);
    if (v < 0) throw FormatError(path + ": negative association strength for " + r[0] + " -> " + r[1]);
    t[{r[0], r[1]}] = v;
  }
  return t;
}

inline ConcretenessRatings load_concreteness(const std::string& path) {
  ConcretenessRatings t;
  for (auto& r : detail::read_tsv(path, 2)) t[r[0]] = detail::parse_number(r[1], path);
  return t;
}

}  // namespace xmc::data
