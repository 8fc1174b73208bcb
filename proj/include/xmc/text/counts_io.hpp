#pragma once

#include <xmc/error.hpp>
#include <xmc/text/cooccurrence.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace xmc::text {

// Counts file:
//   XMCT v1 N=<n>
//   C\t<cluster>\t<count>          one per cluster with a non-zero count
//   J\t<word>\t<cluster>\t<count>  one per non-zero joint count
//   V\t<word>                      vocabulary words that have no J line
// Every line, the last included, ends in a newline.
inline std::string encode_counts(const CooccurrenceTable& table) {
  std::ostringstream os;
  os << "XMCT v1 N=" << table.n_clusters() << '\n';
  for (std::size_t c = 0; c < table.n_clusters(); ++c)
    if (table.count_cluster(c) > 0) os << "C\t" << c << '\t' << table.count_cluster(c) << '\n';
  for (const auto& [w, row] : table.joint_counts()) {
    bool any = false;
    for (std::size_t c = 0; c < row.size(); ++c)
      if (row[c] > 0) {
        os << "J\t" << w << '\t' << c << '\t' << row[c] << '\n';
        any = true;
      }
    if (!any) os << "V\t" << w << '\n';
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::uint64_t parse_count(const std::string& s, std::size_t line_no, const char* what) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end)
    throw FormatError("counts line " + std::to_string(line_no) + ": invalid " + what + " '" + s + "'");
  return v;
}

}  // namespace detail

inline CooccurrenceTable decode_counts(const std::string& content) {
  if (content.empty()) throw FormatError("counts line 1: missing header");
  if (content.back() != '\n') throw FormatError("counts: truncated file (last line has no newline)");
  std::istringstream in(content);
  std::string line;
  std::getline(in, line);
  const std::string prefix = "XMCT v1 N=";
  if (line.rfind(prefix, 0) != 0) throw FormatError("counts line 1: expected header 'XMCT v1 N=<n>'");
  const auto n = detail::parse_count(line.substr(prefix.size()), 1, "cluster count");
  if (n < 1) throw FormatError("counts line 1: N must be positive");
  CooccurrenceTable table(n);
  std::set<std::size_t> seen_clusters;
  std::set<std::pair<std::string, std::size_t>> seen_joint;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    auto cluster_of = [&](const std::string& s) {
      const auto c = detail::parse_count(s, line_no, "cluster");
      if (c >= n)
        throw FormatError("counts line " + std::to_string(line_no) + ": cluster " + s + " out of range for N=" +
                          std::to_string(n));
      return static_cast<std::size_t>(c);
    };
    if (f[0] == "C" && f.size() == 3) {
      const auto c = cluster_of(f[1]);
      if (!seen_clusters.insert(c).second)
        throw FormatError("counts line " + std::to_string(line_no) + ": duplicate cluster " + f[1]);
      table.set_cluster_count(c, detail::parse_count(f[2], line_no, "count"));
    } else if (f[0] == "J" && f.size() == 4) {
      if (f[1].empty()) throw FormatError("counts line " + std::to_string(line_no) + ": empty word");
      const auto c = cluster_of(f[2]);
      if (!seen_joint.emplace(f[1], c).second)
        throw FormatError("counts line " + std::to_string(line_no) + ": duplicate entry for '" + f[1] + "'");
      table.set_joint_count(f[1], c, detail::parse_count(f[3], line_no, "count"));
    } else if (f[0] == "V" && f.size() == 2) {
      if (f[1].empty()) throw FormatError("counts line " + std::to_string(line_no) + ": empty word");
      table.add_word(f[1]);
    } else {
      throw FormatError("counts line " + std::to_string(line_no) + ": malformed record");
    }
  }
  if (!table.consistent()) throw FormatError("counts: some count(w, c) exceeds count(c)");
  return table;
}

inline void save_counts(const CooccurrenceTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << encode_counts(table);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline CooccurrenceTable load_counts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_counts(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace xmc::text
