#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pcarect/event_io.hpp"

namespace pcarect {

enum class Shape { kBar, kCross, kRing };

std::string_view to_string(Shape shape);
Shape parse_shape(std::string_view name);

// A single shape moving on a straight line across the sensor.
//
// Contour events are emitted frame by frame at `event_rate` (events/s) with a
// timestamp jittered uniformly inside the frame; background noise is spread
// uniformly over the sensor and the whole duration at `noise_rate`.
struct SceneSpec {
  SensorGeometry geometry;
  Shape shape = Shape::kRing;
  double size = 20.0;  // ring radius / bar half-length / cross arm length (pixels)
  double x0 = 120.0;   // shape center at t = 0
  double y0 = 90.0;
  double vx = 0.0;  // pixels per second
  double vy = 0.0;
  std::uint64_t duration_us = 1'000'000;
  std::uint64_t frame_us = 1000;
  double event_rate = 100'000.0;
  double noise_rate = 0.0;
  int box_margin = 2;  // ground-truth box padding in pixels

  // Reads "key = value" lines; unknown keys are a ConfigError.
  static SceneSpec parse(std::string_view text);
  std::string to_text() const;
};

struct SyntheticScene {
  EventStream stream;
  // One box per frame, covering [frame start, frame end).
  std::vector<GroundTruthBox> track;
};

// Deterministic for a fixed (spec, seed). Throws ConfigError when the shape
// leaves the sensor at any point of its trajectory.
SyntheticScene synth_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace pcarect
