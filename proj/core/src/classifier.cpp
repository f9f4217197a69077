#include "pcarect/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

// Sparse L1-normalized histogram plus the constant bias feature.
struct SparseSample {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

SparseSample to_sparse(const Histogram& h) {
  SparseSample s;
  const double total = static_cast<double>(h.total());
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    if (h.counts[k] == 0) continue;
    s.index.push_back(static_cast<std::uint32_t>(k));
    s.value.push_back(static_cast<double>(h.counts[k]) / total);
  }
  return s;
}

// w = scale * v; returns (weights, bias) for one binary problem.
std::pair<Eigen::VectorXd, double> pegasos(const std::vector<SparseSample>& samples,
                                           const std::vector<double>& y, std::size_t dim,
                                           const SvmOptions& options) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  double vb = 0.0;
  double scale = 1.0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::uint64_t t = 0;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (options.lambda * static_cast<double>(t));
      const auto& s = samples[i];
      double dot = vb;
      for (std::size_t j = 0; j < s.index.size(); ++j) dot += v(s.index[j]) * s.value[j];
      const double margin = y[i] * scale * dot;

      const double shrink = 1.0 - eta * options.lambda;
      if (shrink <= 0.0) {
        v.setZero();
        vb = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y[i] / scale;
        for (std::size_t j = 0; j < s.index.size(); ++j) v(s.index[j]) += step * s.value[j];
        vb += step;
      }
      if (scale < 1e-9) {
        v *= scale;
        vb *= scale;
        scale = 1.0;
      }
    }
  }
  return {v * scale, vb * scale};
}

}  // namespace

std::vector<double> l1_normalize(std::span<const std::uint32_t> counts) {
  std::vector<double> out(counts.size(), 0.0);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total == 0.0) return out;
  for (std::size_t k = 0; k < counts.size(); ++k) out[k] = counts[k] / total;
  return out;
}

SvmModel train_svm(std::span<const Histogram> histograms, std::span<const int> labels,
                   std::vector<std::string> class_names, const SvmOptions& options) {
  const std::size_t classes = class_names.size();
  if (classes < 2) throw ConfigError("SVM training needs at least 2 classes");
  if (histograms.size() != labels.size()) throw ConfigError("histogram / label count mismatch");
  if (histograms.empty()) throw Error("SVM training set is empty");
  if (!(options.lambda > 0.0) || options.epochs < 1) throw ConfigError("invalid SVM options");
  const std::size_t dim = histograms.front().counts.size();

  std::vector<std::size_t> per_class(classes, 0);
  std::vector<SparseSample> samples;
  samples.reserve(histograms.size());
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    if (histograms[i].counts.size() != dim) throw ConfigError("histograms differ in dictionary size");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " out of range");
    }
    ++per_class[static_cast<std::size_t>(labels[i])];
    samples.push_back(to_sparse(histograms[i]));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (per_class[c] == 0) throw Error("class '" + class_names[c] + "' has no training samples");
  }

  SvmModel model;
  model.weights.resize(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
  model.bias.resize(static_cast<Eigen::Index>(classes));
  model.class_names = std::move(class_names);
  std::vector<double> y(samples.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      y[i] = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
    }
    auto [w, b] = pegasos(samples, y, dim, options);
    model.weights.row(static_cast<Eigen::Index>(c)) = w.transpose();
    model.bias(static_cast<Eigen::Index>(c)) = b;
  }
  return model;
}

int argmax(std::span<const double> scores) noexcept {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

Classification classify(const SvmModel& model, std::span<const std::uint32_t> counts) {
  if (counts.size() != model.dictionary_size()) throw ConfigError("histogram size does not match the SVM");
  const std::vector<double> h = l1_normalize(counts);
  const Eigen::Map<const Eigen::VectorXd> hv(h.data(), static_cast<Eigen::Index>(h.size()));
  const Eigen::VectorXd s = model.weights * hv + model.bias;
  Classification out;
  out.scores.assign(s.data(), s.data() + s.size());
  out.label = argmax(out.scores);
  return out;
}

StreamingWeights export_streaming(const SvmModel& model, std::size_t window_size, int fixed_bits) {
  if (window_size == 0) throw ConfigError("streaming export needs a window size");
  if (fixed_bits < 2 || fixed_bits > 31) throw ConfigError("fixed-point width must lie in [2, 31]");
  StreamingWeights w;
  w.num_classes = model.num_classes();
  w.dictionary_size = model.dictionary_size();
  w.window_size = window_size;
  w.increments.resize(w.num_classes * w.dictionary_size);
  const double inv_s = 1.0 / static_cast<double>(window_size);
  double peak = 0.0;
  for (std::size_t k = 0; k < w.dictionary_size; ++k) {
    for (std::size_t c = 0; c < w.num_classes; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const double inc = (model.weights(ci, static_cast<Eigen::Index>(k)) + model.bias(ci)) * inv_s;
      w.increments[k * w.num_classes + c] = inc;
      peak = std::max(peak, std::abs(inc));
    }
  }
  const double limit = static_cast<double>((std::int64_t{1} << (fixed_bits - 1)) - 1);
  w.fixed_scale = peak > 0.0 ? limit / peak : 1.0;
  w.fixed.resize(w.increments.size());
  for (std::size_t i = 0; i < w.increments.size(); ++i) {
    w.fixed[i] = static_cast<std::int32_t>(std::llround(w.increments[i] * w.fixed_scale));
  }
  return w;
}

std::vector<double> window_scores(const StreamingWeights& w, std::span<const std::uint32_t> counts) {
  std::vector<double> s(w.num_classes, 0.0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    const auto inc = w.leaf(k);
    for (std::size_t c = 0; c < w.num_classes; ++c) s[c] += counts[k] * inc[c];
  }
  return s;
}

std::vector<std::int64_t> window_scores_fixed(const StreamingWeights& w,
                                              std::span<const std::uint32_t> counts) {
  std::vector<std::int64_t> s(w.num_classes, 0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    const auto inc = w.leaf_fixed(k);
    for (std::size_t c = 0; c < w.num_classes; ++c) s[c] += static_cast<std::int64_t>(counts[k]) * inc[c];
  }
  return s;
}

StreamScorer::StreamScorer(const StreamingWeights& weights, ScoreMode mode)
    : weights_(&weights),
      mode_(mode),
      window_(weights.window_size),
      float_sums_(weights.num_classes, 0.0),
      fixed_sums_(weights.num_classes, 0) {
  if (weights.window_size == 0) throw ConfigError("stream scorer needs a window size");
}

void StreamScorer::push(std::int32_t leaf) noexcept {
  const std::size_t cap = window_.size();
  const std::size_t classes = weights_->num_classes;
  if (size_ == cap) {
    const auto old = static_cast<std::size_t>(window_[head_]);
    if (mode_ == ScoreMode::kFixed) {
      const auto inc = weights_->leaf_fixed(old);
      for (std::size_t c = 0; c < classes; ++c) fixed_sums_[c] -= inc[c];
    } else {
      const auto inc = weights_->leaf(old);
      for (std::size_t c = 0; c < classes; ++c) float_sums_[c] -= inc[c];
    }
    head_ = (head_ + 1) % cap;
    --size_;
  }
  window_[(head_ + size_) % cap] = leaf;
  ++size_;
  const auto k = static_cast<std::size_t>(leaf);
  if (mode_ == ScoreMode::kFixed) {
    const auto inc = weights_->leaf_fixed(k);
    for (std::size_t c = 0; c < classes; ++c) fixed_sums_[c] += inc[c];
  } else {
    const auto inc = weights_->leaf(k);
    for (std::size_t c = 0; c < classes; ++c) float_sums_[c] += inc[c];
  }
}

Classification StreamScorer::update(std::int32_t leaf) {
  push(leaf);
  return current();
}

Classification StreamScorer::current() const {
  Classification out;
  if (mode_ == ScoreMode::kFixed) {
    out.scores.resize(fixed_sums_.size());
    // Integer argmax first so ties resolve exactly, then report in float units.
    int best = 0;
    for (std::size_t c = 0; c < fixed_sums_.size(); ++c) {
      out.scores[c] = static_cast<double>(fixed_sums_[c]) / weights_->fixed_scale;
      if (fixed_sums_[c] > fixed_sums_[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    out.label = best;
  } else {
    out.scores = float_sums_;
    out.label = argmax(out.scores);
  }
  return out;
}

void StreamScorer::reset() {
  head_ = 0;
  size_ = 0;
  std::fill(float_sums_.begin(), float_sums_.end(), 0.0);
  std::fill(fixed_sums_.begin(), fixed_sums_.end(), 0);
}

}  // namespace pcarect
