#include "pcarect/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double squared_distance(const FeatureMatrix& a, Eigen::Index i, const FeatureMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

FeatureMatrix seed_plus_plus(const FeatureMatrix& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  FeatureMatrix centers(k, x.cols());
  auto first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
  centers.row(0) = x.row(first);
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(x, i, centers, 0);

  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double w = d2[static_cast<std::size_t>(i)];
        if (w > 0.0 && target < w) {
          pick = i;
          break;
        }
        target -= w;
      }
      // Guard against rounding running off the end: take the last positive weight.
      if (d2[static_cast<std::size_t>(pick)] == 0.0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
    }
    centers.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, squared_distance(x, i, centers, c));
    }
  }
  return centers;
}

FeatureMatrix collapse_duplicates(const FeatureMatrix& centers) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    bool dup = false;
    for (auto j : keep) {
      if (centers.row(i) == centers.row(j)) {
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  FeatureMatrix out(static_cast<Eigen::Index>(keep.size()), centers.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = centers.row(keep[r]);
  return out;
}

}  // namespace

std::string_view to_string(FeatureSpace space) {
  switch (space) {
    case FeatureSpace::kRect:
      return "RECT";
    case FeatureSpace::kPcaRect:
      return "PCA-RECT";
    case FeatureSpace::kVpcaRect:
      return "vPCA-RECT";
  }
  return "RECT";
}

FeatureTransform FeatureTransform::identity(std::size_t dim) {
  FeatureTransform t;
  t.impl_ = dim;
  return t;
}

FeatureTransform FeatureTransform::pca(PcaModel model) {
  FeatureTransform t;
  t.impl_ = std::move(model);
  return t;
}

FeatureTransform FeatureTransform::virtual_projection(VirtualProjection projection) {
  FeatureTransform t;
  t.impl_ = std::move(projection);
  return t;
}

FeatureSpace FeatureTransform::space() const noexcept {
  if (std::holds_alternative<PcaModel>(impl_)) return FeatureSpace::kPcaRect;
  if (std::holds_alternative<VirtualProjection>(impl_)) return FeatureSpace::kVpcaRect;
  return FeatureSpace::kRect;
}

std::size_t FeatureTransform::input_dim() const noexcept {
  if (auto* p = pca_model()) return p->input_dim();
  if (auto* v = projection()) return v->input_dim;
  return std::get<std::size_t>(impl_);
}

std::size_t FeatureTransform::output_dim() const noexcept {
  if (auto* p = pca_model()) return p->output_dim();
  if (auto* v = projection()) return v->output_dim();
  return std::get<std::size_t>(impl_);
}

void FeatureTransform::apply(std::span<const double> in, std::span<double> out) const {
  if (auto* p = pca_model()) {
    p->project(in, out);
  } else if (auto* v = projection()) {
    v->apply(in, out);
  } else {
    if (in.size() != out.size() || in.size() != input_dim()) {
      throw ConfigError("feature dimension mismatch");
    }
    std::copy(in.begin(), in.end(), out.begin());
  }
}

FeatureMatrix FeatureTransform::apply(const FeatureMatrix& in) const {
  if (auto* p = pca_model()) {
    if (static_cast<std::size_t>(in.cols()) != p->input_dim()) throw ConfigError("feature dimension mismatch");
    return (in.rowwise() - p->mean.transpose()) * p->components.transpose();
  }
  if (auto* v = projection()) return v->apply(in);
  if (static_cast<std::size_t>(in.cols()) != input_dim()) throw ConfigError("feature dimension mismatch");
  return in;
}

KMeansResult kmeans(const FeatureMatrix& samples, int k, const KMeansOptions& options) {
  const Eigen::Index n = samples.rows();
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (n < k) {
    throw Error("k-means needs at least k=" + std::to_string(k) + " samples, got " + std::to_string(n));
  }
  std::mt19937_64 rng(options.seed);
  KMeansResult result;
  FeatureMatrix centers = seed_plus_plus(samples, k, rng);

  const Eigen::VectorXd sample_sq = samples.rowwise().squaredNorm();
  std::vector<std::int32_t> assign(static_cast<std::size_t>(n), 0);
  double previous = std::numeric_limits<double>::infinity();

  for (int it = 0; it < std::max(1, options.max_iterations); ++it) {
    // Assignment: argmin ||x||^2 - 2 x.c + ||c||^2, exact inertia on the winner.
    const Eigen::VectorXd center_sq = centers.rowwise().squaredNorm();
    const Eigen::MatrixXd cross = samples * centers.transpose();
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = sample_sq(i) - 2.0 * cross(i, c) + center_sq(c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
      inertia += squared_distance(samples, i, centers, best);
    }
    result.inertia_history.push_back(inertia);
    result.iterations = it + 1;

    const bool converged =
        inertia == 0.0 || (std::isfinite(previous) && (previous - inertia) <= options.tolerance * previous);
    if (converged) break;
    previous = inertia;

    // Update; empty clusters keep their centroid.
    FeatureMatrix sums = FeatureMatrix::Zero(k, samples.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = assign[static_cast<std::size_t>(i)];
      sums.row(c) += samples.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto cnt = counts[static_cast<std::size_t>(c)];
      if (cnt > 0) centers.row(c) = sums.row(c) / static_cast<double>(cnt);
    }
  }

  result.centroids = collapse_duplicates(centers);
  result.assignment = std::move(assign);
  return result;
}

Dictionary learn_dictionary(const FeatureMatrix& samples, int k, const KMeansOptions& options,
                            FeatureTransform transform) {
  if (k < 2) throw ConfigError("dictionary size must be at least 2");
  if (static_cast<std::size_t>(samples.cols()) != transform.output_dim()) {
    throw ConfigError("dictionary samples do not match the feature transform dimension");
  }
  KMeansResult km = kmeans(samples, k, options);
  if (km.centroids.rows() < 2) throw Error("dictionary collapsed to fewer than 2 distinct features");
  return Dictionary{std::move(km.centroids), std::move(transform)};
}

std::uint64_t Histogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

HistogramAccumulator::HistogramAccumulator(std::size_t dictionary_size, std::size_t window_size) {
  if (dictionary_size == 0) throw ConfigError("histogram needs a non-empty dictionary");
  if (window_size == 0) throw ConfigError("histogram window must hold at least one event");
  current_.counts.assign(dictionary_size, 0);
  current_.window_size = window_size;
}

std::optional<Histogram> HistogramAccumulator::add(std::int32_t leaf) {
  ++current_.counts[static_cast<std::size_t>(leaf)];
  if (++filled_ < current_.window_size) return std::nullopt;
  Histogram done = current_;
  reset();
  return done;
}

void HistogramAccumulator::reset() {
  std::fill(current_.counts.begin(), current_.counts.end(), 0);
  filled_ = 0;
}

std::vector<Histogram> accumulate(const KdTree& tree, const FeatureMatrix& features,
                                  std::size_t window_size) {
  HistogramAccumulator acc(tree.point_count(), window_size);
  std::vector<Histogram> out;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto leaf = tree.descend({features.row(i).data(), static_cast<std::size_t>(features.cols())});
    if (auto h = acc.add(leaf)) out.push_back(std::move(*h));
  }
  return out;
}

}  // namespace pcarect
