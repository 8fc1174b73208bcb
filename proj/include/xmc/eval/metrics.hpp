#pragma once

#include <xmc/box.hpp>
#include <xmc/data/gold.hpp>
#include <xmc/error.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace xmc::eval {

using Clustering = std::map<std::string, std::size_t>;  // word -> cluster id

// Size-weighted best-match F-score of a clustering against gold classes.
// Only gold words count; a gold word missing from `clusters` is treated as
// its own singleton cluster.
inline double clustering_fscore(const data::Taxonomy& gold, const Clustering& clusters) {
  if (gold.empty()) throw std::invalid_argument("clustering_fscore: empty gold set");
  std::map<std::string, std::set<std::string>> classes;
  for (const auto& [w, cls] : gold) classes[cls].insert(w);
  std::map<std::string, std::set<std::string>> members;  // cluster key -> gold words
  for (const auto& [w, cls] : gold) {
    auto it = clusters.find(w);
    members[it == clusters.end() ? "singleton:" + w : "cluster:" + std::to_string(it->second)].insert(w);
  }
  double total = 0.0;
  for (const auto& [cls, words] : classes) {
    double best = 0.0;
    for (const auto& [key, cw] : members) {
      std::size_t inter = 0;
      for (const auto& w : cw) inter += words.count(w);
      if (inter == 0) continue;
      const double p = static_cast<double>(inter) / static_cast<double>(cw.size());
      const double r = static_cast<double>(inter) / static_cast<double>(words.size());
      best = std::max(best, 2.0 * p * r / (p + r));
    }
    total += static_cast<double>(words.size()) / static_cast<double>(gold.size()) * best;
  }
  return total;
}

// Mean strength over ordered pairs (x, y), x != y, of words from `words` that
// share a cluster and appear in the association table. Absent when no pair
// qualifies.
inline std::optional<double> mean_association_strength(const Clustering& clusters, const data::AssociationTable& assoc,
                                                        const std::vector<std::string>& words) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : words) {
    auto cx = clusters.find(x);
    if (cx == clusters.end()) continue;
    for (const auto& y : words) {
      if (x == y) continue;
      auto cy = clusters.find(y);
      if (cy == clusters.end() || cy->second != cx->second) continue;
      auto a = assoc.find({x, y});
      if (a == assoc.end()) continue;
      sum += a->second;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// Product-moment correlation; throws on length mismatch or zero variance.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const auto inter = intersection_area(a, b);
  const auto uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0;

  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

// Micro counts over (image, class) pairs.
inline Confusion multilabel_confusion(const std::vector<std::set<std::string>>& predicted,
                                      const std::vector<std::set<std::string>>& gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("multilabel_confusion: length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& p : predicted[i]) (gold[i].count(p) ? c.tp : c.fp)++;
    for (const auto& g : gold[i])
      if (!predicted[i].count(g)) ++c.fn;
  }
  return c;
}

// Greedy one-to-one matching by descending IoU; only pairs with IoU > 0.5
// match. Ties are taken in (predicted index, gold index) order.
inline std::vector<std::pair<std::size_t, std::size_t>> match_boxes(const std::vector<BoundingBox>& predicted,
                                                                   const std::vector<BoundingBox>& gold,
                                                                   double min_iou = 0.5) {
  struct Cand {
    double iou;
    std::size_t p, g;
  };
  std::vector<Cand> cands;
  for (std::size_t p = 0; p < predicted.size(); ++p)
    for (std::size_t g = 0; g < gold.size(); ++g)
      if (const double v = iou(predicted[p], gold[g]); v > min_iou) cands.push_back({v, p, g});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.iou > b.iou; });
  std::vector<bool> used_p(predicted.size()), used_g(gold.size());
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const auto& c : cands) {
    if (used_p[c.p] || used_g[c.g]) continue;
    used_p[c.p] = used_g[c.g] = true;
    matches.emplace_back(c.p, c.g);
  }
  return matches;
}

inline Confusion localization_confusion(const std::vector<BoundingBox>& predicted,
                                        const std::vector<BoundingBox>& gold) {
  const auto m = match_boxes(predicted, gold).size();
  return {m, predicted.size() - m, gold.size() - m};
}

}  // namespace xmc::eval
