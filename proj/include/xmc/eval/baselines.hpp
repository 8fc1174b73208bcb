#pragma once

#include <xmc/box.hpp>
#include <xmc/data/gold.hpp>
#include <xmc/eval/metrics.hpp>
#include <xmc/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace xmc::eval {

// Each word independently to a uniform cluster in [0, k).
inline Clustering random_clustering(const std::vector<std::string>& words, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("random_clustering: k must be >= 1");
  Rng rng(seed);
  Clustering out;
  for (const auto& w : words) out[w] = rng.below(k);
  return out;
}

// k boxes with corners drawn uniformly on the pixel grid; zero-area draws are
// resampled.
inline std::vector<BoundingBox> random_boxes(std::size_t k, int image_size, Rng& rng) {
  if (image_size < 1) throw std::invalid_argument("random_boxes: image size must be positive");
  std::vector<BoundingBox> out;
  while (out.size() < k) {
    int x0 = rng.range(0, image_size), x1 = rng.range(0, image_size);
    int y0 = rng.range(0, image_size), y1 = rng.range(0, image_size);
    if (x0 == x1 || y0 == y1) continue;
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    out.push_back({x0, y0, x1, y1});
  }
  return out;
}

inline std::vector<BoundingBox> random_boxes(std::size_t k, int image_size, std::uint64_t seed) {
  Rng rng(seed);
  return random_boxes(k, image_size, rng);
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<double> inertia;  // after each assignment step
  std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint
// or after max_iter rounds; an emptied cluster is re-seeded with the point
// farthest from its current centroid.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 300) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  Rng rng(seed);
  KMeansResult r;
  r.centroids.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  while (r.centroids.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : r.centroids) best = std::min(best, detail::sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        if (u < d2[pick]) break;
        u -= d2[pick];
      }
      // never re-pick an existing centre (possible only through rounding)
      if (d2[pick] == 0.0) {
        std::size_t j = n;
        while (j-- > 0 && d2[j] == 0.0) {
        }
        pick = j;
      }
    } else {
      pick = rng.below(n);
    }
    r.centroids.push_back(points[pick]);
  }

  r.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  const std::size_t dim = points.empty() ? 0 : points[0].size();
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c)
        if (const double d = detail::sq_dist(points[i], r.centroids[c]); d < bd) {
          bd = d;
          best = c;
        }
      if (r.assignment[i] != best) changed = true;
      r.assignment[i] = best;
      inertia += bd;
    }
    r.inertia.push_back(inertia);
    r.iterations = iter + 1;
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[r.assignment[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) r.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double fd = -1;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[r.assignment[i]] > 1)
          if (const double d = detail::sq_dist(points[i], r.centroids[r.assignment[i]]); d > fd) {
            fd = d;
            far = i;
          }
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      counts[c] = 1;
      r.centroids[c] = points[far];
    }
  }
  return r;
}

// Caption-level co-occurrence: entry (i, j), i != j, counts the captions in
// which words i and j both occur. Rows are L2-normalized.
struct CooccurrenceEmbeddings {
  std::vector<std::string> vocabulary;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::size_t> frequency;  // token occurrences

  const std::vector<double>* row(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? nullptr : &rows[it->second];
  }
};

inline CooccurrenceEmbeddings cooccurrence_embeddings(const std::vector<std::vector<std::string>>& corpus) {
  CooccurrenceEmbeddings e;
  std::set<std::string> vocab;
  for (const auto& caption : corpus)
    for (const auto& t : caption) {
      vocab.insert(t);
      ++e.frequency[t];
    }
  e.vocabulary.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < e.vocabulary.size(); ++i) e.index[e.vocabulary[i]] = i;
  const std::size_t v = e.vocabulary.size();
  e.rows.assign(v, std::vector<double>(v, 0.0));
  for (const auto& caption : corpus) {
    std::set<std::size_t> ids;
    for (const auto& t : caption) ids.insert(e.index[t]);
    for (auto a : ids)
      for (auto b : ids)
        if (a != b) e.rows[a][b] += 1.0;
  }
  for (auto& r : e.rows) {
    double norm = 0;
    for (double x : r) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : r) x /= norm;
  }
  return e;
}

inline double cosine_normalized(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return d;
}

struct TextOnlyOptions {
  std::size_t representatives = 20;
  std::size_t min_occurrences = 10;  // a representative must occur more than this many times
};

// Text-only concreteness: mean cosine to the most concrete representative
// words minus mean cosine to the most abstract ones. Returns a score for
// every corpus word.
inline std::map<std::string, double> textonly_concreteness(const std::vector<std::vector<std::string>>& corpus,
                                                           const data::ConcretenessRatings& gold,
                                                           const TextOnlyOptions& opt = {}) {
  const auto emb = cooccurrence_embeddings(corpus);
  std::vector<std::pair<double, std::string>> qualifying;
  for (const auto& [w, rating] : gold) {
    auto f = emb.frequency.find(w);
    if (f != emb.frequency.end() && f->second > opt.min_occurrences) qualifying.emplace_back(rating, w);
  }
  if (opt.representatives == 0 || qualifying.size() < 2 * opt.representatives)
    throw std::invalid_argument("textonly_concreteness: " + std::to_string(qualifying.size()) +
                                " qualifying words, need " + std::to_string(2 * opt.representatives));
  // descending rating, ties alphabetical
  std::sort(qualifying.begin(), qualifying.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<const std::vector<double>*> concrete, abstract;
  for (std::size_t i = 0; i < opt.representatives; ++i) {
    concrete.push_back(emb.row(qualifying[i].second));
    abstract.push_back(emb.row(qualifying[qualifying.size() - 1 - i].second));
  }
  std::map<std::string, double> scores;
  for (const auto& w : emb.vocabulary) {
    const auto& r = *emb.row(w);
    double c = 0, a = 0;
    for (auto* rep : concrete) c += cosine_normalized(r, *rep);
    for (auto* rep : abstract) a += cosine_normalized(r, *rep);
    scores[w] = c / static_cast<double>(concrete.size()) - a / static_cast<double>(abstract.size());
  }
  return scores;
}

}  // namespace xmc::eval
