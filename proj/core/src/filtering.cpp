#include "pcarect/filtering.hpp"

#include <algorithm>

#include "pcarect/error.hpp"

namespace pcarect {

void FilterConfig::validate() const {
  if (theta_noise_us == 0 || theta_ref_us == 0) {
    throw ConfigError("filter thresholds must be strictly positive");
  }
}

LastSpikeMap::LastSpikeMap(const SensorGeometry& geometry)
    : geometry_(geometry), last_(geometry.pixel_count(), kNever) {}

void LastSpikeMap::reset() { std::fill(last_.begin(), last_.end(), kNever); }

bool refractory_pass(const Event& e, LastSpikeMap& state, std::uint64_t theta_ref_us) noexcept {
  const std::uint64_t last = state.at(e.x, e.y);
  state.record(e.x, e.y, e.t);
  return last == LastSpikeMap::kNever || e.t - last > theta_ref_us;
}

bool noise_pass(const Event& e, LastSpikeMap& state, std::uint64_t theta_noise_us) noexcept {
  const auto& g = state.geometry();
  const int x0 = std::max(0, e.x - 1);
  const int x1 = std::min(g.cols - 1, e.x + 1);
  const int y0 = std::max(0, e.y - 1);
  const int y1 = std::min(g.rows - 1, e.y + 1);
  bool accepted = false;
  for (int y = y0; y <= y1 && !accepted; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (x == e.x && y == e.y) continue;
      const std::uint64_t last = state.at(x, y);
      if (last != LastSpikeMap::kNever && e.t - last < theta_noise_us) {
        accepted = true;
        break;
      }
    }
  }
  state.record(e.x, e.y, e.t);
  return accepted;
}

EventFilter::EventFilter(const SensorGeometry& geometry, const FilterConfig& config)
    : config_(config), refractory_(geometry), noise_(geometry) {
  config_.validate();
}

void EventFilter::reset() {
  refractory_.reset();
  noise_.reset();
}

EventStream cascade(const EventStream& stream, const FilterConfig& config) {
  EventFilter filter(stream.geometry, config);
  EventStream out{stream.geometry, {}};
  for (const auto& e : stream.events) {
    if (filter.accept(e)) out.events.push_back(e);
  }
  return out;
}

}  // namespace pcarect
