#include "support.hpp"

#include <xmc/text/cooccurrence.hpp>
#include <xmc/text/counts_io.hpp>
#include <xmc/text/listing.hpp>

#include <gtest/gtest.h>

#include <algorithm>

using namespace xmc;
using namespace xmc::text;

namespace {

BinaryClusterVector bits(std::size_t n, std::initializer_list<std::size_t> on) {
  BinaryClusterVector v(n);
  for (auto c : on) v.set(c);
  return v;
}

std::vector<std::string> toks(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

// word with joint counts `joint` against cluster counts `clusters`
CooccurrenceTable table_with(std::vector<std::uint64_t> clusters, const std::string& w, std::vector<std::uint64_t> joint) {
  CooccurrenceTable t(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) t.set_cluster_count(c, clusters[c]);
  for (std::size_t c = 0; c < joint.size(); ++c) t.set_joint_count(w, c, joint[c]);
  return t;
}

}  // namespace

TEST(Observe, EmptyVectorOnlyGrowsVocabulary) {
  CooccurrenceTable t(4);
  t.observe(toks({"a", "dog"}), BinaryClusterVector(4));
  EXPECT_EQ(t.vocabulary_size(), 2u);
  EXPECT_EQ(t.total_joint(), 0u);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(t.count_cluster(c), 0u);
}

TEST(Observe, DuplicateTokensCountOnce) {
  CooccurrenceTable t(5);
  t.observe(toks({"a", "red", "circle", "a"}), bits(5, {3}));
  EXPECT_EQ(t.count_cluster(3), 1u);
  for (const char* w : {"a", "red", "circle"}) EXPECT_EQ(t.count_joint(w, 3), 1u) << w;
  EXPECT_EQ(t.total_joint(), 3u);
  EXPECT_EQ(t.count_cluster(0), 0u);
}

TEST(Observe, RepeatDoublesCounts) {
  CooccurrenceTable once(4), twice(4);
  const auto caption = toks({"a", "cat", "on", "a", "mat"});
  const auto v = bits(4, {0, 2});
  once.observe(caption, v);
  twice.observe(caption, v);
  twice.observe(caption, v);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(twice.count_cluster(c), 2 * once.count_cluster(c));
    for (const auto& w : caption) EXPECT_EQ(twice.count_joint(w, c), 2 * once.count_joint(w, c));
  }
}

TEST(Observe, RejectsWrongLength) {
  CooccurrenceTable t(4);
  EXPECT_THROW(t.observe(toks({"a"}), BinaryClusterVector(3)), ShapeError);
}

TEST(Likelihood, Examples) {
  CooccurrenceTable t(3);
  t.observe(toks({"dog", "runs"}), bits(3, {1}));
  t.observe(toks({"dog", "sits"}), bits(3, {1}));
  EXPECT_EQ(t.p_word_given_cluster("dog", 1), 1.0);
  EXPECT_EQ(t.p_word_given_cluster("runs", 1), 0.5);
  EXPECT_EQ(t.p_word_given_cluster("cat", 1), 0.0);
  EXPECT_EQ(t.p_word_given_cluster("dog", 0), 0.0);
  auto r = table_with({4, 1}, "w", {2, 0});
  EXPECT_EQ(r.p_word_given_cluster("w", 0), 0.5);
}

TEST(Posterior, SingleCluster) {
  auto t = table_with({3, 5, 2}, "w", {0, 4, 0});
  EXPECT_EQ(t.p_cluster_given_word("w"), (std::vector<double>{0, 1, 0}));
}

TEST(Posterior, EvenSplit) {
  auto t = table_with({2, 4, 7}, "w", {1, 2, 0});
  EXPECT_EQ(t.p_cluster_given_word("w"), (std::vector<double>{0.5, 0.5, 0}));
}

TEST(Posterior, UnseenWordAllZero) {
  CooccurrenceTable t(3);
  EXPECT_EQ(t.p_cluster_given_word("nope"), (std::vector<double>(3, 0.0)));
}

TEST(Posterior, SumsToExactlyOneOrZero) {
  Rng rng(13);
  for (int seq = 0; seq < 200; ++seq) {
    const std::size_t n = 2 + rng.below(12);
    CooccurrenceTable t(n);
    for (int obs = 0; obs < 30; ++obs) {
      std::vector<std::string> caption;
      for (std::size_t k = 0, len = rng.below(5); k < len; ++k) caption.push_back("w" + std::to_string(rng.below(8)));
      BinaryClusterVector v(n);
      for (std::size_t c = 0; c < n; ++c) v.set(c, rng.below(3) == 0);
      t.observe(caption, v);
      EXPECT_TRUE(t.consistent());
    }
    for (int w = 0; w < 9; ++w) {
      const auto p = t.p_cluster_given_word("w" + std::to_string(w));
      double s = 0;
      for (double v : p) s += v;
      EXPECT_TRUE(s == 0.0 || s == 1.0) << s;
    }
  }
}

TEST(AssignWord, BelowThresholdIsNone) {
  // P(c0|w) = 0.05 is the largest entry only if every other entry is smaller;
  // 20 clusters with equal likelihood give 0.05 each
  CooccurrenceTable t(20);
  for (std::size_t c = 0; c < 20; ++c) {
    t.set_cluster_count(c, 1);
    t.set_joint_count("w", c, 1);
  }
  const auto a = t.assign_word("w", 0.08);
  EXPECT_FALSE(a.assigned());
  EXPECT_DOUBLE_EQ(a.probability, 0.05);
}

TEST(AssignWord, TieGoesToSmallestIndex) {
  auto t = table_with({2, 2, 2}, "w", {0, 1, 1});
  const auto a = t.assign_word("w", 0.08);
  ASSERT_TRUE(a.assigned());
  EXPECT_EQ(*a.cluster, 1u);
  EXPECT_EQ(a.probability, 0.5);
}

TEST(AssignWord, UnseenIsNone) {
  CooccurrenceTable t(3);
  EXPECT_FALSE(t.assign_word("x", 0.08).assigned());
  EXPECT_EQ(t.concreteness("x"), 0.0);
}

TEST(AssignWord, InclusiveThreshold) {
  auto t = table_with({2, 2}, "w", {1, 1});
  EXPECT_TRUE(t.assign_word("w", 0.5).assigned());
  EXPECT_FALSE(t.assign_word("w", 0.5000001).assigned());
}

TEST(AssignWord, RaisingThresholdNeverAssigns) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint64_t> cc(4), jc(4);
    for (std::size_t c = 0; c < 4; ++c) {
      cc[c] = rng.below(6);
      jc[c] = cc[c] ? rng.below(cc[c] + 1) : 0;
    }
    auto t = table_with(cc, "w", jc);
    const double lo = rng.uniform(), hi = lo + (1 - lo) * rng.uniform();
    if (t.assign_word("w", hi).assigned()) EXPECT_TRUE(t.assign_word("w", lo).assigned());
  }
}

TEST(AssignWord, IndependentOfSentence) {
  CooccurrenceTable t(3);
  t.observe(toks({"dog", "runs"}), bits(3, {0}));
  t.observe(toks({"cat", "sits"}), bits(3, {2}));
  const auto alone = t.encode_sentence(toks({"dog"}), 0.08);
  const auto with = t.encode_sentence(toks({"cat", "dog", "sits"}), 0.08);
  EXPECT_TRUE(alone.test(0));
  EXPECT_TRUE(with.test(0));
  EXPECT_EQ(t.assign_word("dog", 0.08).cluster, std::optional<std::size_t>(0));
}

TEST(EncodeSentence, UnionOfAssignments) {
  CooccurrenceTable t(6);
  t.set_cluster_count(2, 1);
  t.set_cluster_count(5, 1);
  t.set_joint_count("x", 2, 1);
  t.set_joint_count("y", 2, 1);
  t.set_joint_count("z", 5, 1);
  EXPECT_EQ(t.encode_sentence(toks({"x", "y", "z"}), 0.08).set_bits(), (std::vector<std::size_t>{2, 5}));
  EXPECT_EQ(t.encode_sentence(toks({"z", "y", "x"}), 0.08), t.encode_sentence(toks({"x", "y", "z"}), 0.08));
  EXPECT_TRUE(t.encode_sentence(toks({"q", "r"}), 0.08).none());
}

TEST(Concreteness, Examples) {
  EXPECT_EQ(table_with({1, 1}, "w", {1, 0}).concreteness("w"), 1.0);
  EXPECT_EQ(table_with({1, 1}, "w", {1, 1}).concreteness("w"), 0.5);
}

TEST(CountsFile, EmptyTableIsHeaderOnly) {
  CooccurrenceTable t(4);
  EXPECT_EQ(encode_counts(t), "XMCT v1 N=4\n");
  EXPECT_EQ(decode_counts("XMCT v1 N=4\n"), t);
}

TEST(CountsFile, RoundTripPreservesProbabilities) {
  xmc::testing::TempDir dir("counts");
  Rng rng(5);
  CooccurrenceTable t(7);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::string> caption;
    for (std::size_t k = 0; k < 4; ++k) caption.push_back("w" + std::to_string(rng.below(10)));
    BinaryClusterVector v(7);
    for (std::size_t c = 0; c < 7; ++c) v.set(c, rng.below(3) == 0);
    t.observe(caption, v);
  }
  t.add_word("lonely");
  save_counts(t, dir.str("c.tsv"));
  const auto back = load_counts(dir.str("c.tsv"));
  EXPECT_EQ(back, t);
  for (const auto& [w, row] : t.joint_counts()) EXPECT_EQ(back.p_cluster_given_word(w), t.p_cluster_given_word(w));
  EXPECT_EQ(encode_counts(back), encode_counts(t));
}

TEST(CountsFile, Rejections) {
  auto rejects = [](const std::string& body, const std::string& needle) {
    try {
      decode_counts(body);
      ADD_FAILURE() << "accepted: " << body;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  rejects("XMCT v1 N=3\nC\t0\t-1\n", "line 2");
  rejects("XMCT v1 N=3\nC\t0\t2\nJ\tw\t0\t-4\n", "line 3");
  rejects("XMCT v1 N=3\nC\t5\t1\n", "out of range");
  rejects("XMCT v1 N=3\nX\t1\n", "malformed");
  rejects("XMCT v2 N=3\n", "header");
  rejects("", "header");
  rejects("XMCT v1 N=3\nC\t0\t1\nJ\tw\t0\t3\n", "exceeds");
  rejects("XMCT v1 N=3\nC\t0\t12", "truncated");
  rejects("XMCT v1 N=3\nC\t0\t1\nC\t0\t1\n", "duplicate");
}

TEST(Listing, InjectedWordHeadsItsCluster) {
  CooccurrenceTable t(5);
  t.set_cluster_count(3, 4);
  t.set_cluster_count(1, 4);
  t.set_joint_count("x", 3, 4);  // P(3|x) = 1
  t.set_joint_count("y", 3, 3);  // P(3|y) = 0.75
  t.set_joint_count("y", 1, 1);
  t.set_joint_count("b", 3, 1);  // ties between clusters 1 and 3
  t.set_joint_count("b", 1, 1);
  t.set_joint_count("a", 3, 1);
  t.set_joint_count("a", 1, 1);
  EXPECT_EQ(format_cluster_listing(t, 0.08), "Cluster 1: a; b\nCluster 3: x; y\n");
  const auto members = cluster_members(t, 0.08);
  EXPECT_EQ(members.at(3).front().word, "x");
  EXPECT_EQ(members.at(3).front().probability, 1.0);
}

TEST(Listing, EmptyTableListsNothing) {
  EXPECT_EQ(format_cluster_listing(CooccurrenceTable(4), 0.08), "");
}
