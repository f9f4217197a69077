#include "pcarect/kdtree.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <numeric>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

class Builder {
 public:
  explicit Builder(const FeatureMatrix& points) : points_(points) {}

  std::vector<KdNode> run() {
    std::vector<std::int32_t> ids(static_cast<std::size_t>(points_.rows()));
    std::iota(ids.begin(), ids.end(), 0);
    nodes_.reserve(2 * ids.size());
    grow(ids);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::int32_t>& ids) {
    const auto at = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    if (ids.size() == 1) {
      nodes_[at].leaf_index = ids.front();
      return at;
    }

    const int dim = widest_dimension(ids);
    const double split = median_split(ids, dim);
    auto mid = std::stable_partition(ids.begin(), ids.end(),
                                     [&](std::int32_t i) { return points_(i, dim) <= split; });
    std::vector<std::int32_t> right(mid, ids.end());
    ids.erase(mid, ids.end());

    KdNode& node = nodes_[at];
    node.leaf = false;
    node.split_dim = dim;
    node.split_val = split;
    const std::int32_t l = grow(ids);
    const std::int32_t r = grow(right);
    nodes_[at].left = l;
    nodes_[at].right = r;
    return at;
  }

  // Argmax population variance; dimensions with a single distinct value count
  // as zero variance so exact duplicates are detected reliably.
  int widest_dimension(const std::vector<std::int32_t>& ids) const {
    const double n = static_cast<double>(ids.size());
    int best = -1;
    double best_var = 0.0;
    for (Eigen::Index d = 0; d < points_.cols(); ++d) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double sum = 0.0;
      for (auto i : ids) {
        const double v = points_(i, d);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi) continue;
      const double mean = sum / n;
      double sq = 0.0;
      for (auto i : ids) {
        const double dv = points_(i, d) - mean;
        sq += dv * dv;
      }
      const double var = sq / n;
      if (best < 0 || var > best_var) {
        best = static_cast<int>(d);
        best_var = var;
      }
    }
    if (best < 0) {
      throw Error("k-d tree build: duplicate points (ids " + std::to_string(ids[0]) + " and " +
                  std::to_string(ids[1]) + ")");
    }
    return best;
  }

  // Distinct coordinate value whose "<=" side is closest to half the node,
  // keeping both sides non-empty; the smaller value wins ties.
  double median_split(const std::vector<std::int32_t>& ids, int dim) const {
    std::vector<double> values;
    values.reserve(ids.size());
    for (auto i : ids) values.push_back(points_(i, dim));
    std::sort(values.begin(), values.end());
    const auto n = static_cast<long>(values.size());
    long best_gap = std::numeric_limits<long>::max();
    double split = values.front();
    for (long i = 0; i + 1 < n; ++i) {
      if (values[i] == values[i + 1]) continue;
      const long gap = std::labs(2 * (i + 1) - n);
      if (gap < best_gap) {
        best_gap = gap;
        split = values[i];
      }
    }
    return split;
  }

  const FeatureMatrix& points_;
  std::vector<KdNode> nodes_;
};

}  // namespace

KdTree::KdTree(std::vector<KdNode> nodes, std::size_t dim, std::size_t point_count)
    : nodes_(std::move(nodes)), dim_(dim), point_count_(point_count) {
  if (nodes_.empty()) throw Error("k-d tree has no nodes");
  if (nodes_.size() != 2 * point_count_ - 1) throw Error("k-d tree node count does not match points");
  const auto n = static_cast<std::int32_t>(nodes_.size());
  std::vector<bool> seen(point_count_, false);
  for (std::int32_t i = 0; i < n; ++i) {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.leaf) {
      if (node.leaf_index < 0 || static_cast<std::size_t>(node.leaf_index) >= point_count_ ||
          seen[static_cast<std::size_t>(node.leaf_index)]) {
        throw Error("k-d tree leaf " + std::to_string(i) + " has an invalid point id");
      }
      seen[static_cast<std::size_t>(node.leaf_index)] = true;
    } else {
      if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
        throw Error("k-d tree node " + std::to_string(i) + " has invalid children");
      }
      if (node.split_dim < 0 || static_cast<std::size_t>(node.split_dim) >= dim_) {
        throw Error("k-d tree node " + std::to_string(i) + " splits on an invalid dimension");
      }
    }
  }
}

KdTree KdTree::build(const FeatureMatrix& points) {
  if (points.rows() == 0 || points.cols() == 0) throw Error("k-d tree build: empty point set");
  Builder builder(points);
  auto nodes = builder.run();
  return KdTree(std::move(nodes), static_cast<std::size_t>(points.cols()),
                static_cast<std::size_t>(points.rows()));
}

std::int32_t KdTree::descend(std::span<const double> query) const {
  int comparisons = 0;
  return descend(query, comparisons);
}

std::int32_t KdTree::descend(std::span<const double> query, int& comparisons) const {
  if (query.size() != dim_) {
    throw ConfigError("k-d tree query has dimension " + std::to_string(query.size()) +
                      ", tree expects " + std::to_string(dim_));
  }
  comparisons = 0;
  const KdNode* node = &nodes_.front();
  while (!node->leaf) {
    ++comparisons;
    node = &nodes_[static_cast<std::size_t>(
        query[static_cast<std::size_t>(node->split_dim)] <= node->split_val ? node->left : node->right)];
  }
  return node->leaf_index;
}

int KdTree::depth() const {
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.leaf) {
      deepest = std::max(deepest, level[i]);
    } else {
      level[static_cast<std::size_t>(node.left)] = level[i] + 1;
      level[static_cast<std::size_t>(node.right)] = level[i] + 1;
    }
  }
  return deepest;
}

std::int32_t exact_nn(const FeatureMatrix& points, std::span<const double> query) {
  if (points.rows() == 0) throw Error("nearest neighbour search over an empty set");
  if (static_cast<std::size_t>(points.cols()) != query.size()) {
    throw ConfigError("nearest neighbour query dimension mismatch");
  }
  const Eigen::Map<const Eigen::RowVectorXd> q(query.data(), static_cast<Eigen::Index>(query.size()));
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double d = (points.row(i) - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::int32_t>(i);
    }
  }
  return best;
}

void VirtualProjection::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != input_dim || out.size() != kept_dims.size()) {
    throw ConfigError("virtual projection dimension mismatch");
  }
  for (std::size_t i = 0; i < kept_dims.size(); ++i) out[i] = x[static_cast<std::size_t>(kept_dims[i])];
}

FeatureMatrix VirtualProjection::apply(const FeatureMatrix& points) const {
  if (static_cast<std::size_t>(points.cols()) != input_dim) {
    throw ConfigError("virtual projection dimension mismatch");
  }
  FeatureMatrix out(points.rows(), static_cast<Eigen::Index>(kept_dims.size()));
  for (std::size_t i = 0; i < kept_dims.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = points.col(kept_dims[i]);
  }
  return out;
}

VirtualProjection harvest_dims(const KdTree& tree) {
  VirtualProjection proj;
  proj.input_dim = tree.dim();
  std::vector<bool> used(tree.dim(), false);
  for (const auto& node : tree.nodes()) {
    if (!node.leaf) used[static_cast<std::size_t>(node.split_dim)] = true;
  }
  // Ascending, so equal-variance ties resolve the same way after projection.
  for (std::size_t d = 0; d < used.size(); ++d) {
    if (used[d]) proj.kept_dims.push_back(static_cast<int>(d));
  }
  return proj;
}

bool structurally_equal(const KdTree& a, const KdTree& b, std::span<const int> relabel) {
  if (a.nodes().size() != b.nodes().size() || a.point_count() != b.point_count()) return false;
  for (std::size_t i = 0; i < a.nodes().size(); ++i) {
    const auto& x = a.nodes()[i];
    const auto& y = b.nodes()[i];
    if (x.leaf != y.leaf) return false;
    if (x.leaf) {
      if (x.leaf_index != y.leaf_index) return false;
      continue;
    }
    if (x.left != y.left || x.right != y.right || x.split_val != y.split_val) return false;
    if (static_cast<std::size_t>(x.split_dim) >= relabel.size() ||
        relabel[static_cast<std::size_t>(x.split_dim)] != y.split_dim) {
      return false;
    }
  }
  return true;
}

bool structurally_equal(const KdTree& a, const KdTree& b) {
  std::vector<int> identity(a.dim());
  std::iota(identity.begin(), identity.end(), 0);
  return a.dim() == b.dim() && structurally_equal(a, b, identity);
}

}  // namespace pcarect
