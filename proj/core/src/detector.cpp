#include "pcarect/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcarect/error.hpp"

namespace pcarect {

__extension__ using Wide = unsigned __int128;

std::vector<double> landmark_ratios(const LandmarkStats& stats) {
  const std::size_t k = stats.pos_matches.size();
  if (stats.neg_matches.size() != k) throw ConfigError("landmark statistics differ in length");
  const double pos_total = std::accumulate(stats.pos_matches.begin(), stats.pos_matches.end(), 0.0);
  if (pos_total == 0.0) throw Error("no target events matched any dictionary feature");
  std::vector<double> neg(k);
  for (std::size_t i = 0; i < k; ++i) neg[i] = static_cast<double>(std::max<std::uint64_t>(stats.neg_matches[i], 1));
  const double neg_total = std::accumulate(neg.begin(), neg.end(), 0.0);

  std::vector<double> ratios(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double pos = static_cast<double>(stats.pos_matches[i]);
    const double beta_pos = pos / pos_total;
    const double beta_neg = neg[i] / neg_total;
    ratios[i] = (beta_pos * pos) / (beta_neg * neg[i]);
  }
  return ratios;
}

DetectorModel DetectorModel::from_landmarks(std::vector<std::int32_t> landmarks,
                                            std::size_t dictionary_size) {
  DetectorModel m;
  m.is_landmark.assign(dictionary_size, false);
  for (auto l : landmarks) {
    if (l < 0 || static_cast<std::size_t>(l) >= dictionary_size) {
      throw Error("landmark " + std::to_string(l) + " outside the dictionary");
    }
    m.is_landmark[static_cast<std::size_t>(l)] = true;
  }
  m.landmarks = std::move(landmarks);
  return m;
}

DetectorModel select_landmarks(const LandmarkStats& stats, int count) {
  const std::vector<double> ratios = landmark_ratios(stats);
  if (count < 1) throw ConfigError("landmark count must be positive");
  const auto d = std::min<std::size_t>(static_cast<std::size_t>(count), ratios.size());
  std::vector<std::int32_t> order(ratios.size());
  std::iota(order.begin(), order.end(), 0);
  // The totals are shared by every feature, so D orders like Y+ / Y-. Compare
  // that exactly in integers; rounding in the doubles would break real ties
  // differently depending on the scale of the counts.
  auto neg = [&](std::int32_t i) {
    return static_cast<Wide>(std::max<std::uint64_t>(stats.neg_matches[static_cast<std::size_t>(i)], 1));
  };
  auto pos = [&](std::int32_t i) {
    return static_cast<Wide>(stats.pos_matches[static_cast<std::size_t>(i)]);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int32_t a, std::int32_t b) { return pos(a) * neg(b) > pos(b) * neg(a); });
  order.resize(d);
  return DetectorModel::from_landmarks(std::move(order), ratios.size());
}

HeatMapState::HeatMapState(const SensorGeometry& geometry)
    : geometry_(geometry), counts_(geometry.pixel_count(), 0) {
  geometry_.validate();
}

void HeatMapState::update(const DetectorModel& model, const Event& e, std::int32_t leaf) {
  if (!model.contains(leaf)) return;
  ++hits_;
  auto& cell = counts_[static_cast<std::size_t>(e.y) * geometry_.cols + e.x];
  ++cell;
  if (cell > threshold_) {
    ++threshold_;
    fifo_.clear();
  }
  if (cell == threshold_) fifo_.push_back(PixelCoord{e.x, e.y});
}

std::optional<PixelCoord> HeatMapState::detect() const {
  if (fifo_.empty()) return std::nullopt;
  std::uint64_t sx = 0, sy = 0;
  for (const auto& c : fifo_) {
    sx += static_cast<std::uint64_t>(c.x);
    sy += static_cast<std::uint64_t>(c.y);
  }
  const auto n = static_cast<std::uint64_t>(fifo_.size());
  // Round half up on non-negative coordinates: floor((2s + n) / 2n).
  return PixelCoord{static_cast<int>((2 * sx + n) / (2 * n)), static_cast<int>((2 * sy + n) / (2 * n))};
}

void HeatMapState::reset() {
  std::fill(counts_.begin(), counts_.end(), 0);
  threshold_ = 0;
  fifo_.clear();
  hits_ = 0;
}

DetectionMetrics metrics_from_tallies(std::size_t in_box, std::size_t detections, std::size_t gt_windows) {
  DetectionMetrics m;
  m.detections = detections;
  m.in_box = in_box;
  m.gt_windows = gt_windows;
  m.precision_defined = detections > 0;
  m.precision = detections > 0 ? static_cast<double>(in_box) / static_cast<double>(detections) : 0.0;
  m.recall = gt_windows > 0 ? static_cast<double>(in_box) / static_cast<double>(gt_windows) : 0.0;
  return m;
}

DetectionMetrics evaluate(std::span<const WindowDetection> detections,
                          std::span<const GroundTruthBox> ground_truth) {
  std::size_t in_box = 0, detected = 0, gt_windows = 0;
  for (const auto& d : detections) {
    const auto box = std::find_if(ground_truth.begin(), ground_truth.end(),
                                  [&](const GroundTruthBox& b) { return b.covers(d.t_end); });
    if (box != ground_truth.end()) ++gt_windows;
    if (!d.position) continue;
    ++detected;
    if (box != ground_truth.end() && box->contains(d.position->x, d.position->y)) ++in_box;
  }
  return metrics_from_tallies(in_box, detected, gt_windows);
}

}  // namespace pcarect
