#pragma once

#include <xmc/cluster_vector.hpp>
#include <xmc/data/gold.hpp>
#include <xmc/eval/baselines.hpp>
#include <xmc/eval/metrics.hpp>
#include <xmc/eval/report.hpp>
#include <xmc/parallel.hpp>
#include <xmc/text/cooccurrence.hpp>
#include <xmc/visual/cam.hpp>
#include <xmc/visual/network.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace xmc::eval {

// Hard clustering {w -> f(w)} over `words`. Words without an assignment get
// reserved singleton ids N, N+1, ... so they never share a cluster.
inline Clustering model_clustering(const text::CooccurrenceTable& table, const std::vector<std::string>& words,
                                   double text_threshold) {
  Clustering out;
  std::size_t reserved = table.n_clusters();
  for (const auto& w : words) {
    const auto a = table.assign_word(w, text_threshold);
    out[w] = a.cluster ? *a.cluster : reserved++;
  }
  return out;
}

inline std::vector<std::string> gold_words(const data::Taxonomy& gold) {
  std::vector<std::string> out;
  for (const auto& [w, c] : gold) out.push_back(w);
  return out;
}

// Pearson between model concreteness and gold ratings, for each minimum
// corpus frequency; buckets with < 2 words or no variance are absent.
inline MetricsReport concreteness_eval(const std::map<std::string, double>& scores,
                                       const data::ConcretenessRatings& gold,
                                       const std::map<std::string, std::size_t>& frequency,
                                       const std::vector<std::size_t>& min_freqs) {
  for (std::size_t i = 1; i < min_freqs.size(); ++i)
    if (min_freqs[i] < min_freqs[i - 1]) throw std::invalid_argument("concreteness_eval: min_freq list must ascend");
  MetricsReport r;
  r.task = "concreteness";
  for (std::size_t k : min_freqs) {
    std::vector<double> xs, ys;
    for (const auto& [w, rating] : gold) {
      auto f = frequency.find(w);
      auto s = scores.find(w);
      if (f == frequency.end() || f->second < k || f->second == 0 || s == scores.end()) continue;
      xs.push_back(s->second);
      ys.push_back(rating);
    }
    const std::string tag = "min" + std::to_string(k);
    r.set("words_" + tag, static_cast<double>(xs.size()));
    try {
      r.set("pearson_" + tag, pearson(xs, ys));
    } catch (const std::invalid_argument&) {
      r.mark_absent("pearson_" + tag);
    }
  }
  return r;
}

inline std::map<std::string, double> model_concreteness(const text::CooccurrenceTable& table,
                                                        const std::vector<std::string>& words) {
  std::map<std::string, double> out;
  for (const auto& w : words) out[w] = table.concreteness(w);
  return out;
}

using ClassMap = std::map<std::size_t, std::vector<std::string>>;  // cluster -> classes

// Feeds each class name through the text encoder; f(w) = empty leaves the
// class unmappable.
inline ClassMap build_class_map(const std::vector<std::string>& class_words, const text::CooccurrenceTable& table,
                                double text_threshold) {
  ClassMap m;
  for (const auto& w : class_words)
    if (const auto a = table.assign_word(w, text_threshold); a.cluster) m[*a.cluster].push_back(w);
  return m;
}

inline std::set<std::string> classes_for(const BinaryClusterVector& clusters, const ClassMap& map) {
  std::set<std::string> out;
  for (std::size_t c : clusters.set_bits())
    if (auto it = map.find(c); it != map.end()) out.insert(it->second.begin(), it->second.end());
  return out;
}

// One evaluation image with its gold annotations.
struct EvalSample {
  grad::Tensor<float> image;  // 1 x 3 x S x S
  std::set<std::string> classes;
  std::vector<BoundingBox> boxes;
};

inline void put_confusion(MetricsReport& r, const Confusion& c) {
  r.set("precision", c.precision());
  r.set("recall", c.recall());
  r.set("f1", c.f1());
  r.set("tp", static_cast<double>(c.tp));
  r.set("fp", static_cast<double>(c.fp));
  r.set("fn", static_cast<double>(c.fn));
}

inline std::vector<BinaryClusterVector> predict_all(const std::vector<EvalSample>& samples,
                                                    const visual::Network<float>& net, double visual_threshold,
                                                    std::size_t threads) {
  std::vector<BinaryClusterVector> out(samples.size());
  const std::size_t n = net.n_clusters();
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto probs = net.forward(samples[i].image);
    out[i] = visual::predict_clusters<float>(std::span<const float>(probs.ptr(), n), visual_threshold);
  });
  return out;
}

inline MetricsReport multilabel_eval(const std::vector<EvalSample>& samples, const visual::Network<float>& net,
                                     const ClassMap& class_map, double visual_threshold, std::size_t threads = 1) {
  const auto preds = predict_all(samples, net, visual_threshold, threads);
  std::vector<std::set<std::string>> predicted, gold;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    predicted.push_back(classes_for(preds[i], class_map));
    gold.push_back(samples[i].classes);
  }
  MetricsReport r;
  r.task = "classification";
  put_confusion(r, multilabel_confusion(predicted, gold));
  r.set("mapped_clusters", static_cast<double>(class_map.size()));
  return r;
}

// Baseline that predicts every class for every image.
inline MetricsReport all_classes_eval(const std::vector<EvalSample>& samples, const std::vector<std::string>& classes) {
  std::vector<std::set<std::string>> predicted(samples.size(), std::set<std::string>(classes.begin(), classes.end()));
  std::vector<std::set<std::string>> gold;
  for (const auto& s : samples) gold.push_back(s.classes);
  MetricsReport r;
  r.task = "classification_all_classes";
  put_confusion(r, multilabel_confusion(predicted, gold));
  return r;
}

// One CAM box per predicted cluster; degenerate CAMs contribute nothing.
inline std::vector<BoundingBox> predict_boxes(const visual::Network<float>& net, const grad::Tensor<float>& image,
                                              double visual_threshold) {
  const auto inf = net.infer(image);
  const std::size_t n = net.n_clusters();
  const auto clusters = visual::predict_clusters<float>(std::span<const float>(inf.probs.ptr(), n), visual_threshold);
  std::vector<BoundingBox> boxes;
  for (std::size_t c : clusters.set_bits()) {
    const auto map = visual::cam_from_features(inf.features, 0, net.head_weight().value, c);
    const auto up = visual::upsample_bilinear(map, image.dim(2), image.dim(3));
    if (auto b = visual::extract_box(up)) boxes.push_back(*b);
  }
  return boxes;
}

inline MetricsReport localization_eval(const std::vector<EvalSample>& samples, const visual::Network<float>& net,
                                       double visual_threshold, std::size_t threads = 1) {
  std::vector<Confusion> per(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    per[i] = localization_confusion(predict_boxes(net, samples[i].image, visual_threshold), samples[i].boxes);
  });
  Confusion total;
  for (const auto& c : per) total += c;
  MetricsReport r;
  r.task = "localization";
  put_confusion(r, total);
  return r;
}

// k random boxes per image, k = number of gold boxes; image i uses the
// stream derived from (seed, i).
inline MetricsReport random_box_eval(const std::vector<EvalSample>& samples, int image_size, std::uint64_t seed) {
  Confusion total;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng = derive_rng(seed, i);
    total += localization_confusion(random_boxes(samples[i].boxes.size(), image_size, rng), samples[i].boxes);
  }
  MetricsReport r;
  r.task = "localization_random";
  r.seed = seed;
  put_confusion(r, total);
  return r;
}

inline std::size_t category_count(const data::Taxonomy& gold) {
  std::set<std::string> cats;
  for (const auto& [w, c] : gold) cats.insert(c);
  return cats.size();
}

inline MetricsReport clustering_eval(const text::CooccurrenceTable& table, const data::Taxonomy& gold,
                                     double text_threshold) {
  const auto words = gold_words(gold);
  const auto clusters = model_clustering(table, words, text_threshold);
  std::size_t assigned = 0;
  for (const auto& [w, c] : clusters) assigned += c < table.n_clusters();
  MetricsReport r;
  r.task = "clustering";
  r.set("fscore", clustering_fscore(gold, clusters));
  r.set("words", static_cast<double>(words.size()));
  r.set("assigned_words", static_cast<double>(assigned));
  return r;
}

inline MetricsReport association_eval(const text::CooccurrenceTable& table, const data::Taxonomy& gold,
                                      const data::AssociationTable& assoc, double text_threshold) {
  const auto words = gold_words(gold);
  MetricsReport r;
  r.task = "association";
  r.set("mas", mean_association_strength(model_clustering(table, words, text_threshold), assoc, words));
  return r;
}

// Random clustering into as many clusters as there are gold categories,
// averaged over `restarts` seeds derived from `seed`. Restarts without a
// qualifying pair do not enter the MAS mean.
inline MetricsReport random_clustering_eval(const data::Taxonomy& gold, const data::AssociationTable& assoc,
                                            std::uint64_t seed, std::size_t restarts = 100) {
  const auto words = gold_words(gold);
  const std::size_t k = category_count(gold);
  std::vector<double> fs, mas;
  for (std::size_t i = 0; i < restarts; ++i) {
    const auto c = random_clustering(words, k, derive_rng(seed, i).next());
    fs.push_back(clustering_fscore(gold, c));
    if (auto m = mean_association_strength(c, assoc, words)) mas.push_back(*m);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  MetricsReport r;
  r.task = "random_clustering";
  r.seed = seed;
  r.set("k", static_cast<double>(k));
  r.set("restarts", static_cast<double>(restarts));
  const double fm = mean(fs);
  double var = 0;
  for (double x : fs) var += (x - fm) * (x - fm);
  r.set("fscore_mean", fm);
  r.set("fscore_std", std::sqrt(var / static_cast<double>(fs.size())));
  if (mas.empty()) r.mark_absent("mas_mean");
  else r.set("mas_mean", mean(mas));
  r.set("mas_restarts", static_cast<double>(mas.size()));
  return r;
}

// K-means over caption co-occurrence rows of the gold words, K = number of
// gold categories. Gold words missing from the corpus become singletons.
inline MetricsReport kmeans_text_eval(const std::vector<std::vector<std::string>>& corpus, const data::Taxonomy& gold,
                                      const data::AssociationTable& assoc, std::uint64_t seed) {
  const auto emb = cooccurrence_embeddings(corpus);
  const auto words = gold_words(gold);
  std::vector<std::string> present;
  std::vector<std::vector<double>> points;
  for (const auto& w : words)
    if (const auto* row = emb.row(w)) {
      present.push_back(w);
      points.push_back(*row);
    }
  const std::size_t k = std::min(category_count(gold), present.size());
  Clustering c;
  if (k > 0) {
    const auto km = kmeans(points, k, seed);
    for (std::size_t i = 0; i < present.size(); ++i) c[present[i]] = km.assignment[i];
  }
  MetricsReport r;
  r.task = "kmeans_text_only";
  r.seed = seed;
  r.set("k", static_cast<double>(k));
  r.set("fscore", clustering_fscore(gold, c));
  r.set("mas", mean_association_strength(c, assoc, words));
  return r;
}

inline std::map<std::string, std::size_t> token_frequency(const std::vector<std::vector<std::string>>& corpus) {
  std::map<std::string, std::size_t> f;
  for (const auto& caption : corpus)
    for (const auto& t : caption) ++f[t];
  return f;
}

inline const std::vector<std::size_t> kDefaultFrequencyBuckets{1, 50, 100, 200, 400};

// Model concreteness against gold ratings: per-bucket Pearson plus the mean
// model score at each distinct gold rating.
inline MetricsReport model_concreteness_eval(const text::CooccurrenceTable& table, const data::ConcretenessRatings& gold,
                                             const std::map<std::string, std::size_t>& frequency,
                                             const std::vector<std::size_t>& buckets = kDefaultFrequencyBuckets) {
  std::vector<std::string> words;
  for (const auto& [w, r] : gold) words.push_back(w);
  const auto scores = model_concreteness(table, words);
  MetricsReport r = concreteness_eval(scores, gold, frequency, buckets);
  std::map<double, std::pair<double, std::size_t>> by_rating;
  for (const auto& [w, rating] : gold) {
    auto& [sum, n] = by_rating[rating];
    sum += scores.at(w);
    ++n;
  }
  for (const auto& [rating, acc] : by_rating)
    r.set("mean_at_rating_" + format_number(rating), acc.first / static_cast<double>(acc.second));
  return r;
}

// Text-only concreteness baseline. The representative count shrinks to
// half the qualifying words when fewer than 2 * 20 qualify.
inline MetricsReport textonly_concreteness_eval(const std::vector<std::vector<std::string>>& corpus,
                                                const data::ConcretenessRatings& gold,
                                                const std::vector<std::size_t>& buckets = kDefaultFrequencyBuckets) {
  const auto frequency = token_frequency(corpus);
  TextOnlyOptions opt;
  std::size_t qualifying = 0;
  for (const auto& [w, rating] : gold)
    if (auto f = frequency.find(w); f != frequency.end() && f->second > opt.min_occurrences) ++qualifying;
  opt.representatives = std::min(opt.representatives, qualifying / 2);
  MetricsReport r;
  if (opt.representatives == 0) {
    r.task = "textonly_concreteness";
    r.set("representatives", 0.0);
    return r;
  }
  r = concreteness_eval(textonly_concreteness(corpus, gold, opt), gold, frequency, buckets);
  r.task = "textonly_concreteness";
  r.set("representatives", static_cast<double>(opt.representatives));
  return r;
}

}  // namespace xmc::eval
