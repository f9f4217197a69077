#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace pcarect {

// Row-major sample matrix: one feature vector per row.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PcaModel {
  Eigen::VectorXd mean;        // d
  FeatureMatrix components;    // d' x d, orthonormal rows
  Eigen::VectorXd eigenvalues; // d', descending
  double energy_kept = 0.0;    // kept / total eigenvalue mass

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(components.rows()); }

  // components * (x - mean). Throws ConfigError on a dimension mismatch.
  void project(std::span<const double> x, std::span<double> out) const;
  std::vector<double> project(std::span<const double> x) const;
  // mean + components^T * y
  std::vector<double> reconstruct(std::span<const double> y) const;
};

// Either the smallest d' reaching `energy`, or exactly `dims` when dims > 0.
struct PcaTarget {
  double energy = 0.95;
  int dims = 0;
};

// Streaming mean / scatter accumulator. Partial accumulators merge
// commutatively, so samples may be gathered by parallel extractors.
class PcaAccumulator {
 public:
  explicit PcaAccumulator(std::size_t dim);

  void add(std::span<const double> x);
  void merge(const PcaAccumulator& other);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_ + pending_rows_; }

  // Population statistics (divide by n).
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;

 private:
  void flush() const;

  std::size_t dim_;
  mutable std::size_t count_ = 0;
  mutable Eigen::VectorXd mean_;
  mutable Eigen::MatrixXd scatter_;  // sum of (x - mean)(x - mean)^T
  mutable FeatureMatrix pending_;
  mutable std::size_t pending_rows_ = 0;
};

PcaModel fit_pca(const PcaAccumulator& acc, const PcaTarget& target);
PcaModel fit_pca(const FeatureMatrix& samples, const PcaTarget& target);

}  // namespace pcarect
