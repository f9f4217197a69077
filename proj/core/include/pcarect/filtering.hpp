#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pcarect/event_io.hpp"

namespace pcarect {

struct FilterConfig {
  std::uint64_t theta_noise_us = 5000;
  std::uint64_t theta_ref_us = 1000;

  void validate() const;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

// Timestamp of the most recent event seen at every pixel.
class LastSpikeMap {
 public:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

  LastSpikeMap() = default;
  explicit LastSpikeMap(const SensorGeometry& geometry);

  const SensorGeometry& geometry() const noexcept { return geometry_; }
  std::uint64_t at(int x, int y) const noexcept { return last_[index(x, y)]; }
  void record(int x, int y, std::uint64_t t) noexcept { last_[index(x, y)] = t; }
  void reset();

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(geometry_.cols) +
           static_cast<std::size_t>(x);
  }

  SensorGeometry geometry_;
  std::vector<std::uint64_t> last_;
};

// Accepts iff the pixel never fired or t - t_last > theta_ref. Records t for
// the pixel whether or not the event is accepted.
bool refractory_pass(const Event& e, LastSpikeMap& state, std::uint64_t theta_ref_us) noexcept;

// Accepts iff one of the 8 neighbours (center excluded) fired with
// t - t_last < theta_noise. Records t for the pixel on every input event.
bool noise_pass(const Event& e, LastSpikeMap& state, std::uint64_t theta_noise_us) noexcept;

// Streaming refractory -> noise cascade. One instance per stream.
class EventFilter {
 public:
  EventFilter(const SensorGeometry& geometry, const FilterConfig& config);

  bool accept(const Event& e) noexcept {
    return refractory_pass(e, refractory_, config_.theta_ref_us) &&
           noise_pass(e, noise_, config_.theta_noise_us);
  }
  void reset();

 private:
  FilterConfig config_;
  LastSpikeMap refractory_;
  LastSpikeMap noise_;
};

// Survivors of noise_pass(refractory_pass(e)), in input order.
EventStream cascade(const EventStream& stream, const FilterConfig& config);

}  // namespace pcarect
