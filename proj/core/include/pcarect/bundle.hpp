#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcarect/pipeline.hpp"

namespace pcarect {

inline constexpr std::uint32_t kBundleVersion = 1;

// Binary container: "PCARECTB", u32 version, u32 section count, then per
// section a 4-byte tag, a u64 payload length and the payload. All scalars are
// little-endian; doubles are stored as their IEEE-754 bit patterns.
// Sections: CONF (config text), XFRM, DICT, TREE, PACK (optional), SVM_, DETC.
// Unknown sections are skipped on load.
std::vector<std::uint8_t> save_bundle(const Model& model);
Model load_bundle(std::span<const std::uint8_t> bytes);

// Lossless text form of the same sections, for diffing. import_text_bundle
// reads it back to an identical model.
std::string export_text_bundle(const Model& model);
Model import_text_bundle(std::string_view text);

void save_bundle_file(const std::filesystem::path& path, const Model& model);
// Accepts either form; the text form is recognized by its first line.
Model load_bundle_file(const std::filesystem::path& path);

}  // namespace pcarect
