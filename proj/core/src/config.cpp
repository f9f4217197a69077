#include "pcarect/config.hpp"

#include <sstream>

namespace pcarect {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError(line_no, "empty key");
      out.emplace_back(std::string(key), std::string(value));
    }
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for '" + std::string(key) + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string_view to_string(Reduction r) {
  switch (r) {
    case Reduction::kNone:
      return "none";
    case Reduction::kPca:
      return "pca";
    case Reduction::kVpca:
      return "vpca";
  }
  return "none";
}

std::string_view to_string(Profile p) { return p == Profile::kFloat ? "float" : "hardware"; }

Reduction parse_reduction(std::string_view s) {
  if (s == "none") return Reduction::kNone;
  if (s == "pca") return Reduction::kPca;
  if (s == "vpca") return Reduction::kVpca;
  throw ConfigError("unknown reduction '" + std::string(s) + "' (expected none, pca or vpca)");
}

Profile parse_profile(std::string_view s) {
  if (s == "float") return Profile::kFloat;
  if (s == "hardware" || s == "hardware-faithful") return Profile::kHardware;
  throw ConfigError("unknown profile '" + std::string(s) + "' (expected float or hardware)");
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  if (key == "rows") geometry.rows = parse_value<int>(key, value);
  else if (key == "cols") geometry.cols = parse_value<int>(key, value);
  else if (key == "theta_noise_us") filter.theta_noise_us = parse_value<std::uint64_t>(key, value);
  else if (key == "theta_ref_us") filter.theta_ref_us = parse_value<std::uint64_t>(key, value);
  else if (key == "filter") filter_enabled = parse_bool(key, value);
  else if (key == "fifo_size") rect.fifo_size = parse_value<std::size_t>(key, value);
  else if (key == "cell_rows") rect.cell_rows = parse_value<int>(key, value);
  else if (key == "cell_cols") rect.cell_cols = parse_value<int>(key, value);
  else if (key == "patch") rect.patch = parse_value<int>(key, value);
  else if (key == "normalize") rect.normalize = parse_bool(key, value);
  else if (key == "reduction") reduction = parse_reduction(value);
  else if (key == "pca_energy") pca_energy = parse_value<double>(key, value);
  else if (key == "pca_dims") pca_dims = parse_value<int>(key, value);
  else if (key == "dictionary_size") dictionary_size = parse_value<int>(key, value);
  else if (key == "window_size") window_size = parse_value<std::size_t>(key, value);
  else if (key == "landmarks") landmarks = parse_value<int>(key, value);
  else if (key == "profile") profile = parse_profile(value);
  else if (key == "seed") seed = parse_value<std::uint64_t>(key, value);
  else if (key == "sample_cap") sample_cap = parse_value<std::size_t>(key, value);
  else if (key == "kmeans_iterations") kmeans_iterations = parse_value<int>(key, value);
  else if (key == "svm_lambda") svm_lambda = parse_value<double>(key, value);
  else if (key == "svm_epochs") svm_epochs = parse_value<int>(key, value);
  else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) cfg.set(k, v);
  return cfg;
}

std::string PipelineConfig::to_text() const {
  std::ostringstream out;
  out << "rows = " << geometry.rows << '\n'
      << "cols = " << geometry.cols << '\n'
      << "filter = " << (filter_enabled ? "true" : "false") << '\n'
      << "theta_noise_us = " << filter.theta_noise_us << '\n'
      << "theta_ref_us = " << filter.theta_ref_us << '\n'
      << "fifo_size = " << rect.fifo_size << '\n'
      << "cell_rows = " << rect.cell_rows << '\n'
      << "cell_cols = " << rect.cell_cols << '\n'
      << "patch = " << rect.patch << '\n'
      << "normalize = " << (rect.normalize ? "true" : "false") << '\n'
      << "reduction = " << to_string(reduction) << '\n'
      << "pca_energy = " << format_double(pca_energy) << '\n'
      << "pca_dims = " << pca_dims << '\n'
      << "dictionary_size = " << dictionary_size << '\n'
      << "window_size = " << window_size << '\n'
      << "landmarks = " << landmarks << '\n'
      << "profile = " << to_string(profile) << '\n'
      << "seed = " << seed << '\n'
      << "sample_cap = " << sample_cap << '\n'
      << "kmeans_iterations = " << kmeans_iterations << '\n'
      << "svm_lambda = " << format_double(svm_lambda) << '\n'
      << "svm_epochs = " << svm_epochs << '\n';
  return out.str();
}

void PipelineConfig::validate() {
  geometry.validate();
  filter.validate();
  rect.validate();
  if (profile == Profile::kHardware) rect.normalize = false;
  if (!(pca_energy > 0.0 && pca_energy <= 1.0)) throw ConfigError("pca_energy must lie in (0, 1]");
  if (pca_dims < 0 || static_cast<std::size_t>(pca_dims) > rect.dimension()) {
    throw ConfigError("pca_dims must lie in [0, patch^2]");
  }
  if (dictionary_size < 2) throw ConfigError("dictionary_size must be at least 2");
  if (landmarks < 1) throw ConfigError("landmarks must be positive");
  if (sample_cap < static_cast<std::size_t>(dictionary_size)) {
    throw ConfigError("sample_cap must be at least dictionary_size");
  }
  if (kmeans_iterations < 1) throw ConfigError("kmeans_iterations must be positive");
  if (!(svm_lambda > 0.0)) throw ConfigError("svm_lambda must be positive");
  if (svm_epochs < 1) throw ConfigError("svm_epochs must be positive");
}

}  // namespace pcarect
