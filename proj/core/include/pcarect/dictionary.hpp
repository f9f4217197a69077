#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "pcarect/kdtree.hpp"
#include "pcarect/pca.hpp"

namespace pcarect {

enum class FeatureSpace { kRect, kPcaRect, kVpcaRect };

std::string_view to_string(FeatureSpace space);

// Maps a RECT descriptor into the space the dictionary lives in.
class FeatureTransform {
 public:
  FeatureTransform() = default;
  static FeatureTransform identity(std::size_t dim);
  static FeatureTransform pca(PcaModel model);
  static FeatureTransform virtual_projection(VirtualProjection projection);

  FeatureSpace space() const noexcept;
  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;

  void apply(std::span<const double> in, std::span<double> out) const;
  FeatureMatrix apply(const FeatureMatrix& in) const;

  const PcaModel* pca_model() const noexcept { return std::get_if<PcaModel>(&impl_); }
  const VirtualProjection* projection() const noexcept {
    return std::get_if<VirtualProjection>(&impl_);
  }

 private:
  std::variant<std::size_t, PcaModel, VirtualProjection> impl_{std::size_t{0}};
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-4;  // stop when the relative inertia change drops below this
  std::uint64_t seed = 1;
};

struct KMeansResult {
  FeatureMatrix centroids;               // duplicates already collapsed
  std::vector<double> inertia_history;   // one entry per assignment step
  std::vector<std::int32_t> assignment;  // final cluster of every sample
  int iterations = 0;
};

// Lloyd iterations from k-means++ seeding. Throws when samples < k.
KMeansResult kmeans(const FeatureMatrix& samples, int k, const KMeansOptions& options);

struct Dictionary {
  FeatureMatrix centroids;  // K x d'
  FeatureTransform transform;

  std::size_t size() const noexcept { return static_cast<std::size_t>(centroids.rows()); }
  FeatureSpace space() const noexcept { return transform.space(); }
};

// Clusters samples that already live in the transform's output space.
Dictionary learn_dictionary(const FeatureMatrix& samples, int k, const KMeansOptions& options,
                            FeatureTransform transform);

struct Histogram {
  std::vector<std::uint32_t> counts;
  std::size_t window_size = 0;

  std::uint64_t total() const noexcept;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

// Non-overlapping windows of S leaf matches.
class HistogramAccumulator {
 public:
  HistogramAccumulator(std::size_t dictionary_size, std::size_t window_size);

  // Returns the completed histogram on every S-th call and starts a new window.
  std::optional<Histogram> add(std::int32_t leaf);
  const Histogram& current() const noexcept { return current_; }
  std::size_t filled() const noexcept { return filled_; }
  void reset();

 private:
  Histogram current_;
  std::size_t filled_ = 0;
};

// Descends every row of `features` and returns each completed window.
std::vector<Histogram> accumulate(const KdTree& tree, const FeatureMatrix& features,
                                  std::size_t window_size);

}  // namespace pcarect
