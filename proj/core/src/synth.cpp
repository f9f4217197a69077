#include "pcarect/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pcarect/config.hpp"
#include "pcarect/error.hpp"

namespace pcarect {
namespace {

struct Extent {
  double half_w;
  double half_h;
};

Extent shape_extent(Shape shape, double size) {
  switch (shape) {
    case Shape::kBar:
      return {size, size / 4.0};
    case Shape::kCross:
    case Shape::kRing:
      return {size, size};
  }
  return {size, size};
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniformly distributed point on the shape outline, relative to its center.
void contour_point(Shape shape, double size, std::mt19937_64& rng, double& dx, double& dy) {
  const double u = uniform01(rng);
  switch (shape) {
    case Shape::kRing: {
      const double a = 2.0 * std::numbers::pi * u;
      dx = size * std::cos(a);
      dy = size * std::sin(a);
      return;
    }
    case Shape::kBar: {
      // Rectangle outline, sampled by arc length.
      const double w = 2.0 * size;
      const double h = size / 2.0;
      double s = u * 2.0 * (w + h);
      if (s < w) {
        dx = -size + s;
        dy = -h / 2.0;
      } else if ((s -= w) < h) {
        dx = size;
        dy = -h / 2.0 + s;
      } else if ((s -= h) < w) {
        dx = size - s;
        dy = h / 2.0;
      } else {
        s -= w;
        dx = -size;
        dy = h / 2.0 - s;
      }
      return;
    }
    case Shape::kCross: {
      // Two perpendicular strokes of length 2 * size.
      const double s = u * 4.0 * size;
      if (s < 2.0 * size) {
        dx = -size + s;
        dy = 0.0;
      } else {
        dx = 0.0;
        dy = -size + (s - 2.0 * size);
      }
      return;
    }
  }
}

}  // namespace

std::string_view to_string(Shape shape) {
  switch (shape) {
    case Shape::kBar:
      return "bar";
    case Shape::kCross:
      return "cross";
    case Shape::kRing:
      return "ring";
  }
  return "ring";
}

Shape parse_shape(std::string_view name) {
  if (name == "bar") return Shape::kBar;
  if (name == "cross") return Shape::kCross;
  if (name == "ring") return Shape::kRing;
  throw ConfigError("unknown shape '" + std::string(name) + "' (expected bar, cross or ring)");
}

SceneSpec SceneSpec::parse(std::string_view text) {
  SceneSpec spec;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "rows") spec.geometry.rows = parse_value<int>(key, value);
    else if (key == "cols") spec.geometry.cols = parse_value<int>(key, value);
    else if (key == "shape") spec.shape = parse_shape(value);
    else if (key == "size") spec.size = parse_value<double>(key, value);
    else if (key == "x0") spec.x0 = parse_value<double>(key, value);
    else if (key == "y0") spec.y0 = parse_value<double>(key, value);
    else if (key == "vx") spec.vx = parse_value<double>(key, value);
    else if (key == "vy") spec.vy = parse_value<double>(key, value);
    else if (key == "duration_us") spec.duration_us = parse_value<std::uint64_t>(key, value);
    else if (key == "frame_us") spec.frame_us = parse_value<std::uint64_t>(key, value);
    else if (key == "event_rate") spec.event_rate = parse_value<double>(key, value);
    else if (key == "noise_rate") spec.noise_rate = parse_value<double>(key, value);
    else if (key == "box_margin") spec.box_margin = parse_value<int>(key, value);
    else throw ConfigError("unknown scene key '" + key + "'");
  }
  return spec;
}

std::string SceneSpec::to_text() const {
  std::ostringstream out;
  out << "rows = " << geometry.rows << "\ncols = " << geometry.cols << "\nshape = " << to_string(shape)
      << "\nsize = " << size << "\nx0 = " << x0 << "\ny0 = " << y0 << "\nvx = " << vx
      << "\nvy = " << vy << "\nduration_us = " << duration_us << "\nframe_us = " << frame_us
      << "\nevent_rate = " << event_rate << "\nnoise_rate = " << noise_rate
      << "\nbox_margin = " << box_margin << '\n';
  return out.str();
}

SyntheticScene synth_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.geometry.validate();
  if (spec.frame_us == 0) throw ConfigError("frame_us must be positive");
  if (spec.event_rate < 0 || spec.noise_rate < 0) throw ConfigError("rates must be non-negative");
  if (spec.size <= 0) throw ConfigError("shape size must be positive");

  const Extent ext = shape_extent(spec.shape, spec.size);
  const double duration_s = static_cast<double>(spec.duration_us) * 1e-6;
  // Linear motion: checking both endpoints covers the whole trajectory.
  for (double ts : {0.0, duration_s}) {
    const double cx = spec.x0 + spec.vx * ts;
    const double cy = spec.y0 + spec.vy * ts;
    if (std::lround(cx - ext.half_w) < 0 || std::lround(cy - ext.half_h) < 0 ||
        std::lround(cx + ext.half_w) > spec.geometry.cols - 1 ||
        std::lround(cy + ext.half_h) > spec.geometry.rows - 1) {
      throw ConfigError("trajectory leaves the sensor bounds");
    }
  }

  std::mt19937_64 rng(seed);
  SyntheticScene scene;
  scene.stream.geometry = spec.geometry;
  auto& events = scene.stream.events;

  const double per_frame = spec.event_rate * static_cast<double>(spec.frame_us) * 1e-6;
  double carry = 0.0;
  for (std::uint64_t t0 = 0; t0 < spec.duration_us; t0 += spec.frame_us) {
    const std::uint64_t t1 = std::min(t0 + spec.frame_us, spec.duration_us);
    const double ts = static_cast<double>(t0) * 1e-6;
    const double cx = spec.x0 + spec.vx * ts;
    const double cy = spec.y0 + spec.vy * ts;

    GroundTruthBox box;
    box.t_begin = t0;
    box.t_end = t1 - 1;
    box.x_min = std::max(0, static_cast<int>(std::lround(cx - ext.half_w)) - spec.box_margin);
    box.y_min = std::max(0, static_cast<int>(std::lround(cy - ext.half_h)) - spec.box_margin);
    box.x_max = std::min(spec.geometry.cols - 1,
                         static_cast<int>(std::lround(cx + ext.half_w)) + spec.box_margin);
    box.y_max = std::min(spec.geometry.rows - 1,
                         static_cast<int>(std::lround(cy + ext.half_h)) + spec.box_margin);
    scene.track.push_back(box);

    carry += per_frame;
    const auto n = static_cast<std::uint64_t>(carry);
    carry -= static_cast<double>(n);
    const double span = static_cast<double>(t1 - t0);
    for (std::uint64_t i = 0; i < n; ++i) {
      double dx = 0, dy = 0;
      contour_point(spec.shape, spec.size, rng, dx, dy);
      const auto jitter = static_cast<std::uint64_t>(uniform01(rng) * span);
      const bool polarity = (rng() & 1u) != 0;
      events.push_back(Event{static_cast<std::uint16_t>(std::lround(cx + dx)),
                             static_cast<std::uint16_t>(std::lround(cy + dy)), t0 + jitter,
                             polarity});
    }
  }

  const auto noise_count = static_cast<std::uint64_t>(std::llround(spec.noise_rate * duration_s));
  const double cols = spec.geometry.cols;
  const double rows = spec.geometry.rows;
  for (std::uint64_t i = 0; i < noise_count; ++i) {
    const auto x = static_cast<std::uint16_t>(uniform01(rng) * cols);
    const auto y = static_cast<std::uint16_t>(uniform01(rng) * rows);
    const auto t = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(spec.duration_us));
    const bool polarity = (rng() & 1u) != 0;
    events.push_back(Event{x, y, t, polarity});
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return scene;
}

}  // namespace pcarect
