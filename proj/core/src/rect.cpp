#include "pcarect/rect.hpp"

#include <algorithm>
#include <cmath>

#include "pcarect/error.hpp"

namespace pcarect {

void RectConfig::validate() const {
  if (fifo_size == 0) throw ConfigError("RECT FIFO size must be positive");
  if (cell_rows <= 0 || cell_cols <= 0) throw ConfigError("pooling cell size must be positive");
  if (patch <= 0 || patch % 2 == 0) throw ConfigError("patch side must be a positive odd number");
}

RectState::RectState(const SensorGeometry& geometry, const RectConfig& config)
    : geometry_(geometry),
      config_(config),
      grid_rows_((geometry.rows + config.cell_rows - 1) / config.cell_rows),
      grid_cols_((geometry.cols + config.cell_cols - 1) / config.cell_cols),
      fifo_(config.fifo_size),
      counts_(geometry.pixel_count(), 0),
      cells_(static_cast<std::size_t>(grid_rows_) * grid_cols_, 0) {
  geometry_.validate();
  config_.validate();
}

void RectState::adjust(Pixel px, int delta) noexcept {
  counts_[static_cast<std::size_t>(px.y) * geometry_.cols + px.x] += delta;
  cells_[static_cast<std::size_t>(px.y / config_.cell_rows) * grid_cols_ + px.x / config_.cell_cols] +=
      delta;
}

void RectState::push(const Event& e) noexcept {
  const std::size_t capacity = fifo_.size();
  if (fifo_size_ == capacity) {
    adjust(fifo_[fifo_head_], -1);
    fifo_head_ = (fifo_head_ + 1) % capacity;
    --fifo_size_;
  }
  const Pixel px{e.x, e.y};
  fifo_[(fifo_head_ + fifo_size_) % capacity] = px;
  ++fifo_size_;
  adjust(px, +1);
}

void RectState::extract(const Event& e, std::span<double> out) const noexcept {
  const int w = config_.patch;
  const int half = w / 2;
  const int cy = e.y / config_.cell_rows;
  const int cx = e.x / config_.cell_cols;
  const double scale = 1.0 / (static_cast<double>(config_.cell_rows) * config_.cell_cols);
  std::size_t k = 0;
  for (int i = 0; i < w; ++i) {
    const int row = cy - half + i;
    for (int j = 0; j < w; ++j, ++k) {
      const int col = cx - half + j;
      if (row < 0 || col < 0 || row >= grid_rows_ || col >= grid_cols_) {
        out[k] = 0.0;
      } else {
        out[k] = cell_sum(row, col) * scale;
      }
    }
  }
  if (config_.normalize) normalize_l2(out);
}

Descriptor RectState::extract(const Event& e) const {
  Descriptor d{std::vector<double>(config_.dimension()), e};
  extract(e, d.values);
  return d;
}

void RectState::reset() {
  fifo_head_ = 0;
  fifo_size_ = 0;
  std::fill(counts_.begin(), counts_.end(), 0);
  std::fill(cells_.begin(), cells_.end(), 0);
}

void normalize_l2(std::span<double> values) noexcept {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : values) v *= inv;
}

}  // namespace pcarect
