#include <gtest/gtest.h>

#include <cmath>
#include <iostream>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pcarect/error.hpp"
#include "pcarect/kdtree.hpp"
#include "pcarect/rect.hpp"

namespace pcarect {
namespace {

FeatureMatrix uniform_points(std::mt19937_64& rng, int k, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix m(k, d);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = u(rng);
  return m;
}

int ceil_log2(std::size_t k) {
  int b = 0;
  while ((std::size_t{1} << b) < k) ++b;
  return b;
}

std::span<const double> row(const FeatureMatrix& m, Eigen::Index i) {
  return {m.row(i).data(), std::size_t(m.cols())};
}

// Checks every internal node against the build rule on the points below it.
void check_build_rule(const KdTree& t, const FeatureMatrix& pts, std::int32_t at, std::vector<std::int32_t>& ids) {
  const auto& n = t.nodes()[std::size_t(at)];
  if (n.leaf) {
    ids.push_back(n.leaf_index);
    return;
  }
  std::vector<std::int32_t> l, r;
  check_build_rule(t, pts, n.left, l);
  check_build_rule(t, pts, n.right, r);
  for (auto i : l) ASSERT_LE(pts(i, n.split_dim), n.split_val);
  for (auto i : r) ASSERT_GT(pts(i, n.split_dim), n.split_val);
  ids = l;
  ids.insert(ids.end(), r.begin(), r.end());
  std::vector<double> var(std::size_t(pts.cols()));
  for (Eigen::Index d = 0; d < pts.cols(); ++d) {
    double m = 0;
    for (auto i : ids) m += pts(i, d);
    m /= double(ids.size());
    for (auto i : ids) var[std::size_t(d)] += (pts(i, d) - m) * (pts(i, d) - m);
  }
  const auto best = std::max_element(var.begin(), var.end()) - var.begin();
  ASSERT_EQ(n.split_dim, best);
  // Balanced: the sides differ by at most the number of points sharing a value.
  ASSERT_LE(std::abs(long(l.size()) - long(r.size())), long(ids.size()));
}

TEST(KdTreeBuild, SingletonIsLeaf) {
  FeatureMatrix p(1, 3);
  p << 1, 2, 3;
  const auto t = KdTree::build(p);
  EXPECT_EQ(t.depth(), 0);
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.descend(std::vector<double>{9, 9, 9}), 0);
  EXPECT_TRUE(harvest_dims(t).kept_dims.empty());
}

TEST(KdTreeBuild, SplitsOnOnlyVaryingDimension) {
  FeatureMatrix p = FeatureMatrix::Zero(2, 6);
  p(1, 3) = 1.0;
  const auto t = KdTree::build(p);
  EXPECT_FALSE(t.nodes()[0].leaf);
  EXPECT_EQ(t.nodes()[0].split_dim, 3);
  EXPECT_EQ(t.nodes()[0].split_val, 0.0);
  EXPECT_EQ(harvest_dims(t).kept_dims, std::vector<int>{3});
}

TEST(KdTreeBuild, FollowsSplitRule) {
  std::mt19937_64 rng(2);
  for (int d : {2, 5, 13}) {
    const auto p = uniform_points(rng, 200, d);
    const auto t = KdTree::build(p);
    std::vector<std::int32_t> ids;
    check_build_rule(t, p, 0, ids);
    EXPECT_EQ(ids.size(), 200u);
  }
}

TEST(KdTreeBuild, RejectsDuplicatesAndEmpty) {
  FeatureMatrix p(3, 2);
  p << 1, 2, 3, 4, 1, 2;
  EXPECT_THROW(KdTree::build(p), Error);
  EXPECT_THROW(KdTree::build(FeatureMatrix(0, 2)), Error);
}

TEST(KdTreeDescend, SelfRetrievalAndDepth) {
  std::mt19937_64 rng(4);
  for (int k : {2, 3, 64, 100, 950}) {
    for (int d : {5, 81}) {
      const auto p = uniform_points(rng, k, d);
      const auto t = KdTree::build(p);
      EXPECT_LE(t.depth(), ceil_log2(std::size_t(k)) + 1);
      for (int i = 0; i < k; ++i) {
        int cmp = -1;
        ASSERT_EQ(t.descend(row(p, i), cmp), i);
        EXPECT_LE(cmp, t.depth());
      }
    }
  }
}

TEST(KdTreeDescend, ComparisonsEqualLeafDepth) {
  std::mt19937_64 rng(5);
  const auto p = uniform_points(rng, 37, 3);
  const auto t = KdTree::build(p);
  std::vector<int> level(t.nodes().size(), 0);
  std::vector<int> leaf_depth(37, 0);
  for (std::size_t i = 0; i < t.nodes().size(); ++i) {
    const auto& n = t.nodes()[i];
    if (n.leaf) {
      leaf_depth[std::size_t(n.leaf_index)] = level[i];
    } else {
      level[std::size_t(n.left)] = level[std::size_t(n.right)] = level[i] + 1;
    }
  }
  const auto q = uniform_points(rng, 500, 3);
  for (int i = 0; i < 500; ++i) {
    int cmp = 0;
    const auto leaf = t.descend(row(q, i), cmp);
    EXPECT_EQ(cmp, leaf_depth[std::size_t(leaf)]);
  }
  EXPECT_THROW(t.descend(std::vector<double>(4)), ConfigError);
}

TEST(KdTreeDescend, RecallAgainstExactSearchIsLogged) {
  std::mt19937_64 rng(6);
  const auto p = uniform_points(rng, 3000, 5);
  const auto t = KdTree::build(p);
  const auto q = uniform_points(rng, 10'000, 5);
  int hits = 0;
  for (int i = 0; i < q.rows(); ++i) hits += t.descend(row(q, i)) == exact_nn(p, row(q, i));
  const double recall = hits / 10'000.0;
  std::cout << "recall@1 (K=3000, 5-D, backtracking-free): " << recall << "\n";
  RecordProperty("recall_at_1", std::to_string(recall));
  EXPECT_GT(recall, 0.0);
}

TEST(ExactNn, Basics) {
  std::mt19937_64 rng(7);
  const auto p = uniform_points(rng, 20, 4);
  EXPECT_EQ(exact_nn(p, row(p, 7)), 7);
  FeatureMatrix two(3, 1);
  two << 5.0, 1.0, 3.0;
  EXPECT_EQ(exact_nn(two, std::vector<double>{2.0}), 1);  // 1 and 3 tie, lower index wins
  EXPECT_THROW(exact_nn(FeatureMatrix(0, 1), std::vector<double>{0.0}), Error);
}

TEST(ExactNn, MatchesIndependentScan) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = uniform_points(rng, 100, 6);
    const auto q = uniform_points(rng, 50, 6);
    for (int i = 0; i < q.rows(); ++i) {
      const std::vector<double> v(q.row(i).data(), q.row(i).data() + 6);
      ASSERT_EQ(exact_nn(p, v), testing::brute_nn(p, v));
    }
  }
}

TEST(VirtualProjection, RebuildOnKeptDimsIsIdentical) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 5 + trial % 40;
    const auto p = uniform_points(rng, 8 + trial * 3, d);
    const auto a = KdTree::build(p);
    const auto vp = harvest_dims(a);
    EXPECT_LE(vp.kept_dims.size(), a.internal_count());
    const auto b = KdTree::build(vp.apply(p));
    std::vector<int> relabel(std::size_t(d), -1);
    for (std::size_t i = 0; i < vp.kept_dims.size(); ++i) relabel[std::size_t(vp.kept_dims[i])] = int(i);
    EXPECT_TRUE(structurally_equal(a, b, relabel)) << "trial " << trial;
  }
}

TEST(VirtualProjection, RectDescriptorsKeepFewerDims) {
  // Descriptors of a moving shape, where most of the patch is empty most of
  // the time.
  const auto scene = synth_scene(testing::small_scene(Shape::kCross, 1'000'000), 10);
  const SensorGeometry g = scene.stream.geometry;
  const auto& s = scene.stream;
  RectConfig cfg;
  cfg.fifo_size = 400;
  RectState r(g, cfg);
  std::set<std::vector<double>> unique;
  for (const auto& e : s.events) {
    r.push(e);
    unique.insert(r.extract(e).values);
    if (unique.size() == 950) break;
  }
  ASSERT_EQ(unique.size(), 950u);
  FeatureMatrix p(950, 81);
  int i = 0;
  for (const auto& v : unique) {
    for (int j = 0; j < 81; ++j) p(i, j) = v[std::size_t(j)];
    ++i;
  }
  const auto a = KdTree::build(p);
  const auto vp = harvest_dims(a);
  std::cout << "kept dims for 950 RECT descriptors: " << vp.kept_dims.size() << " of 81\n";
  EXPECT_LT(vp.kept_dims.size(), 81u);
  std::vector<int> relabel(81, -1);
  for (std::size_t k = 0; k < vp.kept_dims.size(); ++k) relabel[std::size_t(vp.kept_dims[k])] = int(k);
  EXPECT_TRUE(structurally_equal(a, KdTree::build(vp.apply(p)), relabel));
  for (int k = 0; k < 950; ++k) ASSERT_EQ(a.descend(row(p, k)), k);
}

TEST(KdTree, ConstructorValidates) {
  std::vector<KdNode> bad(3);
  bad[0].leaf = false;
  bad[0].left = 1;
  bad[0].right = 2;
  bad[1].leaf_index = 0;
  bad[2].leaf_index = 0;  // duplicate id
  EXPECT_THROW(KdTree(bad, 1, 2), Error);
  bad[2].leaf_index = 1;
  EXPECT_NO_THROW(KdTree(bad, 1, 2));
  bad[0].split_dim = 4;
  EXPECT_THROW(KdTree(bad, 1, 2), Error);
}

}  // namespace
}  // namespace pcarect
