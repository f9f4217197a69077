#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcarect/event_io.hpp"

namespace pcarect {

struct RectConfig {
  std::size_t fifo_size = 5000;  // s
  int cell_rows = 2;             // p, pooling cell height
  int cell_cols = 2;             // q, pooling cell width
  int patch = 9;                 // w, patch side in cells (odd)
  bool normalize = true;

  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(patch) * static_cast<std::size_t>(patch);
  }
  void validate() const;

  friend bool operator==(const RectConfig&, const RectConfig&) = default;
};

// Flattened w x w patch of pooled counts, row-major.
struct Descriptor {
  std::vector<double> values;
  Event anchor;
};

// FIFO-windowed event-count matrix C and its stride-(p,q) pooled grid R.
//
// R is held as raw integer cell sums (sum of C over each p x q cell, with the
// sensor zero-padded up to a multiple of the cell size); the 1/(p*q) averaging
// weight is applied only when a descriptor is extracted. Every push touches at
// most two cells, so the incremental grid always equals batch pooling of C.
class RectState {
 public:
  RectState(const SensorGeometry& geometry, const RectConfig& config);

  // Evicts the oldest event when the FIFO holds s events, then inserts e.
  void push(const Event& e) noexcept;

  // w x w window of R centered on e's cell, zero outside the grid.
  void extract(const Event& e, std::span<double> out) const noexcept;
  Descriptor extract(const Event& e) const;

  void reset();

  const SensorGeometry& geometry() const noexcept { return geometry_; }
  const RectConfig& config() const noexcept { return config_; }
  std::size_t fifo_count() const noexcept { return fifo_size_; }
  int grid_rows() const noexcept { return grid_rows_; }
  int grid_cols() const noexcept { return grid_cols_; }

  std::uint32_t count(int x, int y) const noexcept {
    return counts_[static_cast<std::size_t>(y) * geometry_.cols + x];
  }
  std::uint32_t cell_sum(int row, int col) const noexcept {
    return cells_[static_cast<std::size_t>(row) * grid_cols_ + col];
  }
  // Row-major m x n counts and (m/p) x (n/q) cell sums.
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  std::span<const std::uint32_t> cell_sums() const noexcept { return cells_; }

 private:
  struct Pixel {
    std::uint16_t x;
    std::uint16_t y;
  };

  void adjust(Pixel px, int delta) noexcept;

  SensorGeometry geometry_;
  RectConfig config_;
  int grid_rows_;
  int grid_cols_;
  std::vector<Pixel> fifo_;
  std::size_t fifo_head_ = 0;  // index of the oldest entry
  std::size_t fifo_size_ = 0;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> cells_;
};

// Euclidean normalization in place; all-zero input is left untouched.
void normalize_l2(std::span<double> values) noexcept;

}  // namespace pcarect
