#pragma once

#include <xmc/cluster_vector.hpp>
#include <xmc/error.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmc::text {

struct TextConfig {
  double text_threshold = 0.08;

  void validate() const {
    if (!(text_threshold > 0.0 && text_threshold < 1.0)) throw ConfigError("text_threshold must lie in (0, 1)");
  }
};

// f(w): the most probable cluster when its probability reaches the threshold.
struct WordAssignment {
  std::string word;
  std::optional<std::size_t> cluster;
  double probability = 0.0;  // max_c P(c|w)

  bool assigned() const { return cluster.has_value(); }
};

// Word/cluster co-occurrence counts gathered from visual predictions.
//
// count(c) grows once per caption predicted to contain cluster c; count(w, c)
// once per caption in which word type w occurs and c was predicted. Cluster
// assignment uses Bayes' rule with a uniform prior, under which
//   P(c|w) = P(w|c) / sum_c' P(w|c'),  P(w|c) = count(w, c) / count(c).
class CooccurrenceTable {
 public:
  using JointCounts = std::map<std::string, std::vector<std::uint64_t>, std::less<>>;

  explicit CooccurrenceTable(std::size_t n_clusters = 0) : cluster_counts_(n_clusters, 0) {}

  std::size_t n_clusters() const { return cluster_counts_.size(); }
  std::size_t vocabulary_size() const { return joint_.size(); }
  const JointCounts& joint_counts() const { return joint_; }
  const std::vector<std::uint64_t>& cluster_counts() const { return cluster_counts_; }
  bool contains(std::string_view w) const { return joint_.find(w) != joint_.end(); }

  std::uint64_t count_cluster(std::size_t c) const { return cluster_counts_.at(c); }
  std::uint64_t count_joint(std::string_view w, std::size_t c) const {
    auto it = joint_.find(w);
    return it == joint_.end() ? 0 : it->second.at(c);
  }

  // Total number of (caption, word type, cluster) increments recorded.
  std::uint64_t total_joint() const {
    std::uint64_t n = 0;
    for (const auto& [w, row] : joint_)
      for (auto v : row) n += v;
    return n;
  }

  void observe(std::span<const std::string> tokens, const BinaryClusterVector& clusters) {
    if (clusters.size() != n_clusters())
      throw ShapeError("observe: cluster vector length " + std::to_string(clusters.size()) + " does not match table N=" +
                       std::to_string(n_clusters()));
    const std::set<std::string_view> types(tokens.begin(), tokens.end());
    const auto set = clusters.set_bits();
    for (std::size_t c : set) ++cluster_counts_[c];
    for (std::string_view w : types) {
      auto& row = row_for(w);
      for (std::size_t c : set) ++row[c];
    }
  }

  // Direct count edits; used when loading files and constructing fixtures.
  void set_cluster_count(std::size_t c, std::uint64_t v) { cluster_counts_.at(c) = v; }
  void set_joint_count(std::string_view w, std::size_t c, std::uint64_t v) {
    if (c >= n_clusters()) throw ShapeError("cluster " + std::to_string(c) + " out of range");
    row_for(w)[c] = v;
  }
  void add_word(std::string_view w) { row_for(w); }

  // true when every count(w, c) <= count(c)
  bool consistent() const {
    for (const auto& [w, row] : joint_)
      for (std::size_t c = 0; c < row.size(); ++c)
        if (row[c] > cluster_counts_[c]) return false;
    return true;
  }

  double p_word_given_cluster(std::string_view w, std::size_t c) const {
    const auto n = cluster_counts_.at(c);
    if (n == 0) return 0.0;
    return static_cast<double>(count_joint(w, c)) / static_cast<double>(n);
  }

  // P(c|w) for every cluster. Entries are renormalized so that their
  // left-to-right sum is exactly 1 (or the vector is all zeros).
  std::vector<double> p_cluster_given_word(std::string_view w) const {
    std::vector<double> p = likelihoods(w);
    double total = 0.0;
    for (double v : p) total += v;
    if (total == 0.0) return p;
    std::size_t last = 0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] /= total;
      if (p[c] > 0.0) last = c;
    }
    // The last non-zero entry absorbs the rounding residual: with S the sum
    // before it, S + fl(1 - S) rounds to exactly 1 for any S in [0, 1].
    double before = 0.0;
    for (std::size_t c = 0; c < last; ++c) before += p[c];
    p[last] = 1.0 - before;
    return p;
  }

  WordAssignment assign_word(std::string_view w, double threshold) const {
    WordAssignment a{std::string(w), std::nullopt, 0.0};
    const auto r = likelihoods(w);
    double total = 0.0;
    std::size_t top = 0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      total += r[c];
      if (r[c] > r[top]) top = c;
    }
    if (total == 0.0) return a;
    a.probability = r[top] / total;
    if (a.probability >= threshold) a.cluster = top;
    return a;
  }

  // max_c P(c|w); 0 for words without co-occurrences
  double concreteness(std::string_view w) const { return assign_word(w, 1.0).probability; }

  // Union of the clusters assigned to the tokens.
  BinaryClusterVector encode_sentence(std::span<const std::string> tokens, double threshold) const {
    BinaryClusterVector v(n_clusters());
    for (const auto& t : tokens)
      if (auto a = assign_word(t, threshold); a.cluster) v.set(*a.cluster);
    return v;
  }

  friend bool operator==(const CooccurrenceTable&, const CooccurrenceTable&) = default;

 private:
  std::vector<std::uint64_t>& row_for(std::string_view w) {
    auto it = joint_.find(w);
    if (it == joint_.end()) it = joint_.emplace(std::string(w), std::vector<std::uint64_t>(n_clusters(), 0)).first;
    return it->second;
  }

  // P(w|c) for every c
  std::vector<double> likelihoods(std::string_view w) const {
    std::vector<double> r(n_clusters(), 0.0);
    auto it = joint_.find(w);
    if (it == joint_.end()) return r;
    for (std::size_t c = 0; c < r.size(); ++c)
      if (cluster_counts_[c] > 0)
        r[c] = static_cast<double>(it->second[c]) / static_cast<double>(cluster_counts_[c]);
    return r;
  }

  std::vector<std::uint64_t> cluster_counts_;
  JointCounts joint_;
};

}  // namespace xmc::text
