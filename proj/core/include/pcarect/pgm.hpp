#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace pcarect {

// Binary (P5) greyscale image, rows x cols, linearly scaled so that the
// largest value maps to 255. An all-zero map stays black.
std::string encode_pgm(std::span<const std::uint32_t> values, int rows, int cols);
std::string encode_pgm(std::span<const double> values, int rows, int cols);

}  // namespace pcarect
