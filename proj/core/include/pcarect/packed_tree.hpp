#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcarect/kdtree.hpp"

namespace pcarect {

// Node word layouts, most significant field first:
//   strict (49 bit): kind 1 | left 12 | right 12 | leaf_index 12 | split_val 8 | split_dim 4
//   wide   (64 bit): kind 1 | left 16 | right 16 | leaf_index 16 | split_val 8 | split_dim 7
// kind is 1 for leaves. split_val is an unsigned 8-bit code of an affine map
// over [min, max] of all split values in the tree.
enum class PackLayout { kStrict49, kWide64 };

struct PackFields {
  int left_bits;
  int right_bits;
  int leaf_bits;
  int split_bits;
  int dim_bits;

  int total_bits() const noexcept { return 1 + left_bits + right_bits + leaf_bits + split_bits + dim_bits; }
};

PackFields fields_of(PackLayout layout) noexcept;
std::string_view to_string(PackLayout layout);

// Empty when the tree fits the layout, otherwise the first violated limit.
std::string layout_violation(const KdTree& tree, PackLayout layout);

struct SplitQuantizer {
  double lo = 0.0;
  double hi = 0.0;

  std::uint8_t encode(double v) const noexcept;
  double decode(std::uint8_t code) const noexcept;

  friend bool operator==(const SplitQuantizer&, const SplitQuantizer&) = default;
};

// ROM image of a tree plus the metadata needed to decode split values.
struct PackedTree {
  PackLayout layout = PackLayout::kStrict49;
  SplitQuantizer quantizer;
  std::size_t dim = 0;
  std::size_t point_count = 0;
  std::vector<std::uint64_t> words;

  int word_bits() const noexcept { return fields_of(layout).total_bits(); }

  // Descent on 8-bit codes: the query coordinate is quantized with the tree's
  // map and goes left when its code is <= the node's code.
  std::int32_t descend(std::span<const double> query) const;
  std::int32_t descend(std::span<const double> query, int& comparisons) const;

  friend bool operator==(const PackedTree&, const PackedTree&) = default;
};

struct UnpackedNode {
  bool leaf;
  std::uint32_t left;
  std::uint32_t right;
  std::uint32_t leaf_index;
  std::uint8_t split_code;
  std::uint32_t split_dim;
};

std::uint64_t encode_node(const UnpackedNode& node, PackLayout layout);
UnpackedNode decode_node(std::uint64_t word, PackLayout layout);

// Throws Error when the tree exceeds the layout's field widths.
PackedTree pack(const KdTree& tree, PackLayout layout);
// Inverse of pack; split values come back as their decoded 8-bit codes.
KdTree unpack(const PackedTree& packed);
// The tree pack/unpack should reproduce: same structure with every split value
// replaced by decode(encode(v)).
KdTree quantize_splits(const KdTree& tree);
SplitQuantizer split_range(const KdTree& tree);

// One word per line as fixed-width lowercase hex (13 digits for the 49-bit
// layout, 16 for the wide one).
std::string write_rom_hex(const PackedTree& packed);
std::vector<std::uint64_t> read_rom_hex(std::string_view text, PackLayout layout);

}  // namespace pcarect
