#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "pcarect/error.hpp"
#include "pcarect/event_io.hpp"
#include "pcarect/filtering.hpp"
#include "pcarect/rect.hpp"

namespace pcarect {

// "key = value" lines, '#' starts a comment. Order is preserved.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

bool parse_bool(std::string_view key, std::string_view value);

// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

template <typename T>
T parse_value(std::string_view key, std::string_view value) {
  if constexpr (std::is_same_v<T, bool>) {
    return parse_bool(key, value);
  } else {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "'");
    }
    return out;
  }
}

enum class Reduction { kNone, kPca, kVpca };
enum class Profile { kFloat, kHardware };

std::string_view to_string(Reduction r);
std::string_view to_string(Profile p);
Reduction parse_reduction(std::string_view s);
Profile parse_profile(std::string_view s);

// Everything needed to train and run the recognition pipeline.
struct PipelineConfig {
  SensorGeometry geometry;
  FilterConfig filter;
  bool filter_enabled = true;
  RectConfig rect;
  Reduction reduction = Reduction::kPca;
  double pca_energy = 0.95;
  int pca_dims = 0;  // > 0 keeps exactly this many components
  int dictionary_size = 3000;
  std::size_t window_size = 100'000;  // S; 0 classifies each stream as one window
  int landmarks = 20;
  Profile profile = Profile::kFloat;
  std::uint64_t seed = 1;
  std::size_t sample_cap = 1'000'000;
  int kmeans_iterations = 100;
  double svm_lambda = 1e-4;
  int svm_epochs = 200;

  // Applies one "key = value" setting; unknown keys throw ConfigError.
  void set(std::string_view key, std::string_view value);
  static PipelineConfig parse(std::string_view text);
  std::string to_text() const;

  // Throws ConfigError on inconsistent values. The hardware-faithful profile
  // forces descriptor normalization off.
  void validate();

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

}  // namespace pcarect
