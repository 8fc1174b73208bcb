#pragma once

#include <xmc/text/cooccurrence.hpp>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace xmc::text {

// Words grouped by f(w), each group sorted by descending P(c|w) with ties
// alphabetical. Clusters with no member are left out.
inline std::map<std::size_t, std::vector<WordAssignment>> cluster_members(const CooccurrenceTable& table,
                                                                        double threshold) {
  std::map<std::size_t, std::vector<WordAssignment>> out;
  for (const auto& [w, row] : table.joint_counts())
    if (auto a = table.assign_word(w, threshold); a.cluster) out[*a.cluster].push_back(std::move(a));
  for (auto& [c, words] : out)
    std::sort(words.begin(), words.end(), [](const WordAssignment& a, const WordAssignment& b) {
      return a.probability != b.probability ? a.probability > b.probability : a.word < b.word;
    });
  return out;
}

// "Cluster <id>: w1; w2; ..." one line per non-empty cluster.
inline std::string format_cluster_listing(const CooccurrenceTable& table, double threshold) {
  std::string out;
  for (const auto& [c, words] : cluster_members(table, threshold)) {
    out += "Cluster " + std::to_string(c) + ":";
    for (std::size_t i = 0; i < words.size(); ++i) out += (i ? "; " : " ") + words[i].word;
    out += '\n';
  }
  return out;
}

}  // namespace xmc::text
