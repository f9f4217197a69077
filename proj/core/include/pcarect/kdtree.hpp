#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcarect/pca.hpp"

namespace pcarect {

struct KdNode {
  bool leaf = true;
  int split_dim = 0;
  double split_val = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf_index = -1;  // dictionary id, leaves only

  friend bool operator==(const KdNode&, const KdNode&) = default;
};

// Max-variance k-d tree with one point per leaf, searched without
// backtracking. Nodes are stored in pre-order with the root at index 0.
class KdTree {
 public:
  KdTree() = default;
  // Validates child links and leaf ids; throws Error on a malformed tree.
  KdTree(std::vector<KdNode> nodes, std::size_t dim, std::size_t point_count);

  // Splits on the dimension of largest population variance (lowest index on
  // ties) at a median value; coordinates <= split value go left. Throws Error
  // on empty input or duplicate points.
  static KdTree build(const FeatureMatrix& points);

  // Root-to-leaf descent. Returns the leaf's point id.
  std::int32_t descend(std::span<const double> query) const;
  std::int32_t descend(std::span<const double> query, int& comparisons) const;

  const std::vector<KdNode>& nodes() const noexcept { return nodes_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t point_count() const noexcept { return point_count_; }
  std::size_t internal_count() const noexcept { return nodes_.size() - point_count_; }
  // Longest root-to-leaf path, in comparisons.
  int depth() const;

 private:
  std::vector<KdNode> nodes_;
  std::size_t dim_ = 0;
  std::size_t point_count_ = 0;
};

// Brute-force Euclidean nearest neighbour; ties go to the lowest index.
std::int32_t exact_nn(const FeatureMatrix& points, std::span<const double> query);

// Coordinate-aligned projection onto the dimensions a tree actually splits on.
struct VirtualProjection {
  std::size_t input_dim = 0;
  std::vector<int> kept_dims;  // ascending

  std::size_t output_dim() const noexcept { return kept_dims.size(); }
  void apply(std::span<const double> x, std::span<double> out) const;
  FeatureMatrix apply(const FeatureMatrix& points) const;

  friend bool operator==(const VirtualProjection&, const VirtualProjection&) = default;
};

VirtualProjection harvest_dims(const KdTree& tree);

// True when both trees have the same shape, leaf ids and split values, and
// every split dimension d of `a` appears in `b` as relabel[d].
bool structurally_equal(const KdTree& a, const KdTree& b, std::span<const int> relabel);
bool structurally_equal(const KdTree& a, const KdTree& b);

}  // namespace pcarect
