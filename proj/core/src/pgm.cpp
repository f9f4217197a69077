#include "pcarect/pgm.hpp"

#include <algorithm>
#include <cmath>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

template <typename T>
std::string encode(std::span<const T> values, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ConfigError("pgm: image size does not match the data");
  }
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  double peak = 0.0;
  for (auto v : values) peak = std::max(peak, static_cast<double>(v));
  for (auto v : values) {
    const double scaled = peak > 0.0 ? 255.0 * std::max(0.0, static_cast<double>(v)) / peak : 0.0;
    out += static_cast<char>(static_cast<unsigned char>(std::lround(scaled)));
  }
  return out;
}

}  // namespace

std::string encode_pgm(std::span<const std::uint32_t> values, int rows, int cols) {
  return encode(values, rows, cols);
}

std::string encode_pgm(std::span<const double> values, int rows, int cols) {
  return encode(values, rows, cols);
}

}  // namespace pcarect
