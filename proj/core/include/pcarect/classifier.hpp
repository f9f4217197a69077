#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pcarect/dictionary.hpp"

namespace pcarect {

struct SvmOptions {
  double lambda = 1e-4;
  int epochs = 200;
  std::uint64_t seed = 1;
};

// One-vs-all linear SVM over L1-normalized dictionary histograms.
struct SvmModel {
  Eigen::MatrixXd weights;  // C x K
  Eigen::VectorXd bias;     // C
  std::vector<std::string> class_names;
  std::string trained_on = "l1";

  std::size_t num_classes() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dictionary_size() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

struct Classification {
  int label = 0;
  std::vector<double> scores;
};

// h / sum(h); an empty histogram stays all-zero.
std::vector<double> l1_normalize(std::span<const std::uint32_t> counts);

// Deterministic Pegasos subgradient descent, one binary problem per class,
// with step 1/(lambda t) and a fixed shuffle per epoch. The bias is learned as
// the weight of a constant input feature. Throws when a class has no samples.
SvmModel train_svm(std::span<const Histogram> histograms, std::span<const int> labels,
                   std::vector<std::string> class_names, const SvmOptions& options);

// argmax over weights * normalize(h) + bias, lowest index on ties.
Classification classify(const SvmModel& model, std::span<const std::uint32_t> counts);
inline Classification classify(const SvmModel& model, const Histogram& h) {
  return classify(model, h.counts);
}

int argmax(std::span<const double> scores) noexcept;

// Per-leaf score increments for a window of S events: (w[c][k] + b[c]) / S,
// so summing the increments of the last S leaves equals the batch score of
// their histogram. The fixed-point copy is what the integer scorer adds.
struct StreamingWeights {
  std::size_t num_classes = 0;
  std::size_t dictionary_size = 0;
  std::size_t window_size = 0;
  std::vector<double> increments;     // K x C, row per leaf
  std::vector<std::int32_t> fixed;    // K x C, round(increment * fixed_scale)
  double fixed_scale = 1.0;

  std::span<const double> leaf(std::size_t k) const noexcept {
    return {increments.data() + k * num_classes, num_classes};
  }
  std::span<const std::int32_t> leaf_fixed(std::size_t k) const noexcept {
    return {fixed.data() + k * num_classes, num_classes};
  }
};

// fixed_bits sets the signed width of the integer increments.
StreamingWeights export_streaming(const SvmModel& model, std::size_t window_size, int fixed_bits = 16);

enum class ScoreMode { kFloat, kFixed };

// Batch window scores under the exported weights (sum_k counts[k] * increment[k]).
std::vector<double> window_scores(const StreamingWeights& w, std::span<const std::uint32_t> counts);
std::vector<std::int64_t> window_scores_fixed(const StreamingWeights& w,
                                              std::span<const std::uint32_t> counts);

// Sliding-window scorer: one add per event, one subtract per eviction.
class StreamScorer {
 public:
  StreamScorer(const StreamingWeights& weights, ScoreMode mode);

  // Adds the new leaf's increments, evicting the oldest leaf once S are held.
  void push(std::int32_t leaf) noexcept;
  Classification update(std::int32_t leaf);
  Classification current() const;

  std::span<const double> float_sums() const noexcept { return float_sums_; }
  std::span<const std::int64_t> fixed_sums() const noexcept { return fixed_sums_; }
  std::size_t filled() const noexcept { return size_; }
  void reset();

 private:
  const StreamingWeights* weights_;
  ScoreMode mode_;
  std::vector<std::int32_t> window_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::vector<double> float_sums_;
  std::vector<std::int64_t> fixed_sums_;
};

}  // namespace pcarect
