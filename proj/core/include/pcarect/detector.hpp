#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pcarect/event_io.hpp"

namespace pcarect {

// Per-feature match counts of target (Y+) and non-target (Y-) events.
struct LandmarkStats {
  std::vector<std::uint64_t> pos_matches;
  std::vector<std::uint64_t> neg_matches;

  explicit LandmarkStats(std::size_t dictionary_size = 0)
      : pos_matches(dictionary_size, 0), neg_matches(dictionary_size, 0) {}
};

// D(k) = (b+ Y+) / (b- Y-) with b+ = Y+ / sum Y+ and b- = Y- / sum Y-. Zero
// non-target counts are floored at one before both b- and the product are
// formed, so the ratio stays finite. Throws when sum Y+ is zero.
std::vector<double> landmark_ratios(const LandmarkStats& stats);

struct DetectorModel {
  std::vector<std::int32_t> landmarks;  // dictionary ids, best ratio first
  std::vector<bool> is_landmark;        // membership by dictionary id

  std::size_t count() const noexcept { return landmarks.size(); }
  bool contains(std::int32_t leaf) const noexcept {
    return leaf >= 0 && static_cast<std::size_t>(leaf) < is_landmark.size() &&
           is_landmark[static_cast<std::size_t>(leaf)];
  }
  static DetectorModel from_landmarks(std::vector<std::int32_t> landmarks, std::size_t dictionary_size);
};

// Indices of the `count` largest ratios, lower index first on ties.
DetectorModel select_landmarks(const LandmarkStats& stats, int count);

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Full-resolution landmark heat map with the running-max mean FIFO.
class HeatMapState {
 public:
  explicit HeatMapState(const SensorGeometry& geometry);

  // One step of the landmark counting loop; no-op unless leaf is a landmark.
  void update(const DetectorModel& model, const Event& e, std::int32_t leaf);

  // Mean of the FIFO coordinates rounded to the nearest pixel; nullopt when empty.
  std::optional<PixelCoord> detect() const;

  std::uint32_t threshold() const noexcept { return threshold_; }
  const std::vector<PixelCoord>& fifo() const noexcept { return fifo_; }
  std::uint64_t hits() const noexcept { return hits_; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  const SensorGeometry& geometry() const noexcept { return geometry_; }
  void reset();

 private:
  SensorGeometry geometry_;
  std::vector<std::uint32_t> counts_;
  std::uint32_t threshold_ = 0;
  std::vector<PixelCoord> fifo_;
  std::uint64_t hits_ = 0;
};

struct WindowDetection {
  std::uint64_t t_end = 0;
  std::optional<PixelCoord> position;
};

struct DetectionMetrics {
  std::size_t detections = 0;    // windows that produced a position
  std::size_t in_box = 0;        // ... inside the matching ground-truth box
  std::size_t gt_windows = 0;    // windows with a ground-truth box
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = false;  // false when there were no detections
};

DetectionMetrics metrics_from_tallies(std::size_t in_box, std::size_t detections, std::size_t gt_windows);

// A window is matched to the first box whose time span covers t_end. A single
// box spanning the whole sequence works as per-sequence ground truth.
DetectionMetrics evaluate(std::span<const WindowDetection> detections,
                          std::span<const GroundTruthBox> ground_truth);

}  // namespace pcarect
