#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcarect/pipeline.hpp"

namespace pcarect::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2 };

// Entry point shared by main() and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct StageTimes {
  double filter_ns = 0.0;  // mean per input event
  double rect_ns = 0.0;    // per surviving event from here on
  double match_ns = 0.0;
  double score_ns = 0.0;
};

struct BenchReport {
  std::size_t events = 0;       // input events replayed
  std::size_t accepted = 0;     // events that passed the filters
  std::size_t windows = 0;
  std::uint64_t label_digest = 0;  // hash of every window label, for determinism checks
  double seconds = 0.0;
  double events_per_second = 0.0;
  double p50_ns = 0.0;
  double p99_ns = 0.0;
  StageTimes stages;
  // Wall time of the 2N-event replay over the N-event one.
  double linearity_ratio = 0.0;
  bool linear = false;  // ratio within 25% of 2
};

// Replays the stream back to back (timestamps shifted) until at least
// min_events events went through the pipeline. An empty stream yields an
// all-zero report.
BenchReport run_bench(const Model& model, const EventStream& stream, std::size_t min_events,
                      bool check_linearity = true);

std::string format_bench(const BenchReport& report);

}  // namespace pcarect::cli
