#include "pcarect/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

constexpr std::size_t kBlockRows = 1024;

// Chan et al. pairwise update of (n, mean, scatter).
void combine(std::size_t& n_a, Eigen::VectorXd& mean_a, Eigen::MatrixXd& scatter_a, std::size_t n_b,
             const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& scatter_b) {
  if (n_b == 0) return;
  if (n_a == 0) {
    n_a = n_b;
    mean_a = mean_b;
    scatter_a = scatter_b;
    return;
  }
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);
  const double n = na + nb;
  const Eigen::VectorXd delta = mean_b - mean_a;
  scatter_a += scatter_b + (na * nb / n) * (delta * delta.transpose());
  mean_a += delta * (nb / n);
  n_a += n_b;
}

}  // namespace

void PcaModel::project(std::span<const double> x, std::span<double> out) const {
  if (x.size() != input_dim() || out.size() != output_dim()) {
    throw ConfigError("PCA projection expects " + std::to_string(input_dim()) + "-D input, got " +
                      std::to_string(x.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::Map<Eigen::VectorXd> ov(out.data(), static_cast<Eigen::Index>(out.size()));
  ov.noalias() = components * (xv - mean);
}

std::vector<double> PcaModel::project(std::span<const double> x) const {
  std::vector<double> out(output_dim());
  project(x, out);
  return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> y) const {
  if (y.size() != output_dim()) throw ConfigError("PCA reconstruction dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd x = mean + components.transpose() * yv;
  return {x.data(), x.data() + x.size()};
}

PcaAccumulator::PcaAccumulator(std::size_t dim)
    : dim_(dim),
      mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      scatter_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      pending_(kBlockRows, static_cast<Eigen::Index>(dim)) {
  if (dim == 0) throw ConfigError("PCA dimension must be positive");
}

void PcaAccumulator::add(std::span<const double> x) {
  if (x.size() != dim_) throw ConfigError("PCA sample dimension mismatch");
  for (std::size_t j = 0; j < dim_; ++j) {
    pending_(static_cast<Eigen::Index>(pending_rows_), static_cast<Eigen::Index>(j)) = x[j];
  }
  if (++pending_rows_ == kBlockRows) flush();
}

void PcaAccumulator::flush() const {
  if (pending_rows_ == 0) return;
  const auto rows = static_cast<Eigen::Index>(pending_rows_);
  const auto block = pending_.topRows(rows);
  const Eigen::VectorXd block_mean = block.colwise().mean().transpose();
  const FeatureMatrix centered = block.rowwise() - block_mean.transpose();
  Eigen::MatrixXd block_scatter = centered.transpose() * centered;
  combine(count_, mean_, scatter_, pending_rows_, block_mean, block_scatter);
  pending_rows_ = 0;
}

void PcaAccumulator::merge(const PcaAccumulator& other) {
  if (other.dim_ != dim_) throw ConfigError("cannot merge PCA accumulators of different dimension");
  flush();
  other.flush();
  combine(count_, mean_, scatter_, other.count_, other.mean_, other.scatter_);
}

Eigen::VectorXd PcaAccumulator::mean() const {
  flush();
  return mean_;
}

Eigen::MatrixXd PcaAccumulator::covariance() const {
  flush();
  if (count_ == 0) return scatter_;
  return scatter_ / static_cast<double>(count_);
}

PcaModel fit_pca(const PcaAccumulator& acc, const PcaTarget& target) {
  if (acc.count() < 2) throw Error("PCA needs at least 2 samples, got " + std::to_string(acc.count()));
  const auto d = static_cast<Eigen::Index>(acc.dim());
  if (target.dims < 0 || target.dims > d) {
    throw ConfigError("PCA dims must lie in [1, " + std::to_string(d) + "]");
  }
  if (target.dims == 0 && !(target.energy > 0.0 && target.energy <= 1.0)) {
    throw ConfigError("PCA energy must lie in (0, 1]");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(acc.covariance());
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  // Eigen returns ascending order.
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index i = 0; i < d; ++i) values(i) = std::max(values(i), 0.0);
  const double total = values.sum();
  if (!(total > 0.0)) throw Error("PCA samples have zero total variance");

  Eigen::Index keep = target.dims;
  if (keep == 0) {
    double cumulative = 0.0;
    keep = d;
    for (Eigen::Index i = 0; i < d; ++i) {
      cumulative += values(i);
      if (cumulative / total >= target.energy) {
        keep = i + 1;
        break;
      }
    }
  }

  PcaModel model;
  model.mean = acc.mean();
  model.eigenvalues = values.head(keep);
  model.energy_kept = model.eigenvalues.sum() / total;
  model.components.resize(keep, d);
  for (Eigen::Index k = 0; k < keep; ++k) {
    Eigen::VectorXd v = vectors.col(k);
    // Sign convention: the entry of largest magnitude (first on ties) is positive.
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    }
    if (v(arg) < 0) v = -v;
    model.components.row(k) = v.transpose();
  }
  return model;
}

PcaModel fit_pca(const FeatureMatrix& samples, const PcaTarget& target) {
  if (samples.cols() == 0) throw ConfigError("PCA samples have zero dimension");
  PcaAccumulator acc(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    acc.add({samples.row(i).data(), static_cast<std::size_t>(samples.cols())});
  }
  return fit_pca(acc, target);
}

}  // namespace pcarect
