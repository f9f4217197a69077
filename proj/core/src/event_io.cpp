#include "pcarect/event_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Splits on ',' into exactly N fields; false on any other field count.
template <std::size_t N>
bool split_fields(std::string_view line, std::array<std::string_view, N>& fields) {
  std::size_t n = 0;
  while (true) {
    auto comma = line.find(',');
    if (n == N) return false;
    fields[n++] = line.substr(0, comma);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return n == N;
}

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    ++line_no;
    if (!trim(line).empty()) fn(line_no, trim(line));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

void SensorGeometry::validate() const {
  if (rows <= 0 || cols <= 0) {
    throw ConfigError("sensor geometry must be positive, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  if (rows > 65535 || cols > 65535) throw ConfigError("sensor geometry exceeds 16-bit coordinates");
}

EventStream parse_csv(std::string_view text, const SensorGeometry& geometry) {
  geometry.validate();
  EventStream stream{geometry, {}};
  stream.events.reserve(text.size() / 16);
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::array<std::string_view, 4> f;
    if (!split_fields(line, f)) throw ParseError(line_no, "expected 4 fields x,y,t,p");
    long long x = 0, y = 0;
    std::uint64_t t = 0;
    int p = 0;
    if (!parse_int(f[0], x) || !parse_int(f[1], y) || !parse_int(f[2], t) || !parse_int(f[3], p)) {
      throw ParseError(line_no, "malformed event '" + std::string(line) + "'");
    }
    if (p != 0 && p != 1) throw ParseError(line_no, "polarity must be 0 or 1");
    if (x < 0 || y < 0 || x >= geometry.cols || y >= geometry.rows) {
      throw ParseError(line_no, "event (" + std::to_string(x) + "," + std::to_string(y) +
                                    ") outside " + std::to_string(geometry.cols) + "x" +
                                    std::to_string(geometry.rows) + " sensor");
    }
    if (!stream.events.empty() && t < stream.events.back().t) {
      throw ParseError(line_no, "timestamp regression (" + std::to_string(t) + " < " +
                                    std::to_string(stream.events.back().t) + ")");
    }
    stream.events.push_back(
        Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, p == 1});
  });
  return stream;
}

void write_csv(std::ostream& out, std::span<const Event> events) {
  for (const auto& e : events) {
    out << e.x << ',' << e.y << ',' << e.t << ',' << (e.p ? 1 : 0) << '\n';
  }
}

std::string write_csv(const EventStream& stream) {
  std::ostringstream out;
  write_csv(out, stream.events);
  return out.str();
}

EventStream parse_nmnist_bin(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kRecord = 5;
  if (bytes.size() % kRecord != 0) {
    throw ParseError(bytes.size() / kRecord + 1,
                     "truncated N-MNIST record (" + std::to_string(bytes.size()) +
                         " bytes is not a multiple of 5)");
  }
  EventStream stream{kNmnistGeometry, {}};
  stream.events.reserve(bytes.size() / kRecord);
  for (std::size_t i = 0; i < bytes.size(); i += kRecord) {
    const std::size_t record = i / kRecord + 1;
    Event e;
    e.x = bytes[i];
    e.y = bytes[i + 1];
    e.p = (bytes[i + 2] & 0x80u) != 0;
    e.t = (static_cast<std::uint64_t>(bytes[i + 2] & 0x7Fu) << 16) |
          (static_cast<std::uint64_t>(bytes[i + 3]) << 8) | static_cast<std::uint64_t>(bytes[i + 4]);
    if (!stream.geometry.contains(e.x, e.y)) {
      throw ParseError(record, "N-MNIST event outside 34x34 sensor");
    }
    if (!stream.events.empty() && e.t < stream.events.back().t) {
      throw ParseError(record, "timestamp regression");
    }
    stream.events.push_back(e);
  }
  return stream;
}

void validate(const EventStream& stream) {
  stream.geometry.validate();
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const auto& e = stream.events[i];
    if (!stream.geometry.contains(e.x, e.y)) throw ParseError(i + 1, "event outside sensor");
    if (i > 0 && e.t < stream.events[i - 1].t) throw ParseError(i + 1, "timestamp regression");
  }
}

std::vector<GroundTruthBox> parse_ground_truth_csv(std::string_view text) {
  std::vector<GroundTruthBox> boxes;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.front() == '#') return;
    std::array<std::string_view, 6> f;
    GroundTruthBox b;
    if (!split_fields(line, f) || !parse_int(f[0], b.t_begin) || !parse_int(f[1], b.t_end) ||
        !parse_int(f[2], b.x_min) || !parse_int(f[3], b.y_min) || !parse_int(f[4], b.x_max) ||
        !parse_int(f[5], b.y_max)) {
      throw ParseError(line_no, "expected t_begin,t_end,x_min,y_min,x_max,y_max");
    }
    if (b.t_end < b.t_begin || b.x_max < b.x_min || b.y_max < b.y_min) {
      throw ParseError(line_no, "empty ground-truth box");
    }
    boxes.push_back(b);
  });
  return boxes;
}

std::string write_ground_truth_csv(std::span<const GroundTruthBox> boxes) {
  std::ostringstream out;
  for (const auto& b : boxes) {
    out << b.t_begin << ',' << b.t_end << ',' << b.x_min << ',' << b.y_min << ',' << b.x_max << ','
        << b.y_max << '\n';
  }
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

EventStream load_events(const std::filesystem::path& path, const SensorGeometry& geometry) {
  try {
    if (path.extension() == ".bin") {
      auto bytes = read_binary_file(path);
      return parse_nmnist_bin(bytes);
    }
    return parse_csv(read_text_file(path), geometry);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace pcarect
