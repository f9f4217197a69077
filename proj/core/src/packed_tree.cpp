#include "pcarect/packed_tree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

std::uint64_t mask(int bits) { return bits >= 64 ? ~0ull : (1ull << bits) - 1; }

int hex_digits(PackLayout layout) { return (fields_of(layout).total_bits() + 3) / 4; }

}  // namespace

PackFields fields_of(PackLayout layout) noexcept {
  switch (layout) {
    case PackLayout::kStrict49:
      return {12, 12, 12, 8, 4};
    case PackLayout::kWide64:
      return {16, 16, 16, 8, 7};
  }
  return {12, 12, 12, 8, 4};
}

std::string_view to_string(PackLayout layout) {
  return layout == PackLayout::kStrict49 ? "strict49" : "wide64";
}

std::string layout_violation(const KdTree& tree, PackLayout layout) {
  const PackFields f = fields_of(layout);
  const std::size_t max_nodes = std::size_t{1} << std::min(f.left_bits, f.right_bits);
  if (tree.nodes().size() > max_nodes) {
    return std::to_string(tree.nodes().size()) + " nodes exceed the " + std::to_string(max_nodes) +
           "-node address space";
  }
  if (tree.point_count() > (std::size_t{1} << f.leaf_bits)) {
    return std::to_string(tree.point_count()) + " leaves exceed the " + std::to_string(f.leaf_bits) +
           "-bit index field";
  }
  int max_dim = -1;
  for (const auto& n : tree.nodes()) {
    if (!n.leaf) max_dim = std::max(max_dim, n.split_dim);
  }
  if (max_dim >= (1 << f.dim_bits)) {
    return "split dimension " + std::to_string(max_dim) + " exceeds the " +
           std::to_string(f.dim_bits) + "-bit dimension field";
  }
  return {};
}

std::uint8_t SplitQuantizer::encode(double v) const noexcept {
  if (!(hi > lo)) return 0;
  const double scaled = std::round((v - lo) / (hi - lo) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

double SplitQuantizer::decode(std::uint8_t code) const noexcept {
  if (!(hi > lo)) return lo;
  return lo + (hi - lo) * (static_cast<double>(code) / 255.0);
}

std::uint64_t encode_node(const UnpackedNode& node, PackLayout layout) {
  const PackFields f = fields_of(layout);
  auto check = [](std::uint64_t v, int bits, const char* name) {
    if (v > mask(bits)) {
      throw Error(std::string("packed node field '") + name + "' value " + std::to_string(v) +
                  " exceeds " + std::to_string(bits) + " bits");
    }
    return v;
  };
  std::uint64_t w = node.leaf ? 1u : 0u;
  w = (w << f.left_bits) | check(node.left, f.left_bits, "left");
  w = (w << f.right_bits) | check(node.right, f.right_bits, "right");
  w = (w << f.leaf_bits) | check(node.leaf_index, f.leaf_bits, "leaf_index");
  w = (w << f.split_bits) | check(node.split_code, f.split_bits, "split_val");
  w = (w << f.dim_bits) | check(node.split_dim, f.dim_bits, "split_dim");
  return w;
}

UnpackedNode decode_node(std::uint64_t word, PackLayout layout) {
  const PackFields f = fields_of(layout);
  if (f.total_bits() < 64 && (word >> f.total_bits()) != 0) {
    throw Error("packed node word has bits above position " + std::to_string(f.total_bits()));
  }
  UnpackedNode n{};
  n.split_dim = static_cast<std::uint32_t>(word & mask(f.dim_bits));
  word >>= f.dim_bits;
  n.split_code = static_cast<std::uint8_t>(word & mask(f.split_bits));
  word >>= f.split_bits;
  n.leaf_index = static_cast<std::uint32_t>(word & mask(f.leaf_bits));
  word >>= f.leaf_bits;
  n.right = static_cast<std::uint32_t>(word & mask(f.right_bits));
  word >>= f.right_bits;
  n.left = static_cast<std::uint32_t>(word & mask(f.left_bits));
  word >>= f.left_bits;
  n.leaf = (word & 1u) != 0;
  return n;
}

SplitQuantizer split_range(const KdTree& tree) {
  SplitQuantizer q{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& n : tree.nodes()) {
    if (n.leaf) continue;
    q.lo = std::min(q.lo, n.split_val);
    q.hi = std::max(q.hi, n.split_val);
  }
  if (q.lo > q.hi) q = {0.0, 0.0};
  return q;
}

PackedTree pack(const KdTree& tree, PackLayout layout) {
  if (auto why = layout_violation(tree, layout); !why.empty()) {
    throw Error("tree does not fit the " + std::string(to_string(layout)) + " layout: " + why);
  }
  PackedTree packed;
  packed.layout = layout;
  packed.quantizer = split_range(tree);
  packed.dim = tree.dim();
  packed.point_count = tree.point_count();
  packed.words.reserve(tree.nodes().size());
  for (const auto& n : tree.nodes()) {
    UnpackedNode u{};
    u.leaf = n.leaf;
    if (n.leaf) {
      u.leaf_index = static_cast<std::uint32_t>(n.leaf_index);
    } else {
      u.left = static_cast<std::uint32_t>(n.left);
      u.right = static_cast<std::uint32_t>(n.right);
      u.split_code = packed.quantizer.encode(n.split_val);
      u.split_dim = static_cast<std::uint32_t>(n.split_dim);
    }
    packed.words.push_back(encode_node(u, layout));
  }
  return packed;
}

KdTree unpack(const PackedTree& packed) {
  std::vector<KdNode> nodes;
  nodes.reserve(packed.words.size());
  for (auto w : packed.words) {
    const UnpackedNode u = decode_node(w, packed.layout);
    KdNode n;
    n.leaf = u.leaf;
    if (u.leaf) {
      n.leaf_index = static_cast<std::int32_t>(u.leaf_index);
    } else {
      n.left = static_cast<std::int32_t>(u.left);
      n.right = static_cast<std::int32_t>(u.right);
      n.split_dim = static_cast<int>(u.split_dim);
      n.split_val = packed.quantizer.decode(u.split_code);
    }
    nodes.push_back(n);
  }
  return KdTree(std::move(nodes), packed.dim, packed.point_count);
}

KdTree quantize_splits(const KdTree& tree) {
  const SplitQuantizer q = split_range(tree);
  std::vector<KdNode> nodes = tree.nodes();
  for (auto& n : nodes) {
    if (!n.leaf) n.split_val = q.decode(q.encode(n.split_val));
  }
  return KdTree(std::move(nodes), tree.dim(), tree.point_count());
}

std::int32_t PackedTree::descend(std::span<const double> query) const {
  int comparisons = 0;
  return descend(query, comparisons);
}

std::int32_t PackedTree::descend(std::span<const double> query, int& comparisons) const {
  if (query.size() != dim) throw ConfigError("packed tree query dimension mismatch");
  if (words.empty()) throw Error("packed tree is empty");
  comparisons = 0;
  UnpackedNode node = decode_node(words.front(), layout);
  while (!node.leaf) {
    ++comparisons;
    const std::uint8_t code = quantizer.encode(query[node.split_dim]);
    node = decode_node(words[code <= node.split_code ? node.left : node.right], layout);
  }
  return static_cast<std::int32_t>(node.leaf_index);
}

std::string write_rom_hex(const PackedTree& packed) {
  const int digits = hex_digits(packed.layout);
  std::string out;
  out.reserve(packed.words.size() * static_cast<std::size_t>(digits + 1));
  char buf[32];
  for (auto w : packed.words) {
    std::snprintf(buf, sizeof buf, "%0*llx\n", digits, static_cast<unsigned long long>(w));
    out += buf;
  }
  return out;
}

std::vector<std::uint64_t> read_rom_hex(std::string_view text, PackLayout layout) {
  const auto digits = static_cast<std::size_t>(hex_digits(layout));
  std::vector<std::uint64_t> words;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      std::uint64_t w = 0;
      auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), w, 16);
      if (line.size() != digits || ec != std::errc() || ptr != line.data() + line.size()) {
        throw ParseError(line_no, "expected " + std::to_string(digits) + " hex digits");
      }
      decode_node(w, layout);  // rejects stray high bits
      words.push_back(w);
    }
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return words;
}

}  // namespace pcarect
