#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pcarect {

// Sensor resolution in pixels. Defaults to a 240 x 180 DAVIS.
struct SensorGeometry {
  int rows = 180;
  int cols = 240;

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < cols && y < rows;
  }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  void validate() const;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

inline constexpr SensorGeometry kNmnistGeometry{34, 34};

// One camera spike. Polarity is carried through I/O but ignored downstream.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;  // microseconds
  bool p = false;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
};

// Header-less "x,y,t,p" lines. Blank lines are skipped. Throws ParseError on
// malformed lines, out-of-bounds coordinates and timestamp regressions.
EventStream parse_csv(std::string_view text, const SensorGeometry& geometry);
std::string write_csv(const EventStream& stream);
void write_csv(std::ostream& out, std::span<const Event> events);

// N-MNIST binary records: 5 bytes per event, big-endian
//   byte0 = x, byte1 = y, byte2 bit 7 = polarity,
//   byte2 bits 6..0 | byte3 | byte4 = 23-bit timestamp (us).
EventStream parse_nmnist_bin(std::span<const std::uint8_t> bytes);

// Throws if geometry bounds or timestamp ordering are violated.
void validate(const EventStream& stream);

// Axis-aligned box (inclusive pixel bounds) valid for [t_begin, t_end].
struct GroundTruthBox {
  std::uint64_t t_begin = 0;
  std::uint64_t t_end = 0;
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  bool contains(int x, int y) const noexcept {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  bool covers(std::uint64_t t) const noexcept { return t >= t_begin && t <= t_end; }

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

// "t_begin,t_end,x_min,y_min,x_max,y_max" lines.
std::vector<GroundTruthBox> parse_ground_truth_csv(std::string_view text);
std::string write_ground_truth_csv(std::span<const GroundTruthBox> boxes);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Dispatches on extension: ".bin" is N-MNIST, anything else is CSV.
EventStream load_events(const std::filesystem::path& path, const SensorGeometry& geometry);

}  // namespace pcarect
