// Acceptance run: one PASS / FAIL / SKIP line per criterion, nonzero exit on
// any FAIL. Criterion 9 needs PCARECT_NMNIST_DIR pointing at the extracted
// N-MNIST set (Train/<digit>/*.bin and Test/<digit>/*.bin).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "pcarect/classifier.hpp"
#include "pcarect/detector.hpp"
#include "pcarect/filtering.hpp"
#include "pcarect/kdtree.hpp"
#include "pcarect/packed_tree.hpp"
#include "pcarect/rect.hpp"
#include "pcarect/synth.hpp"
#include "pcarect/training.hpp"

namespace {

using namespace pcarect;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::kFail, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Status::kPass : Status::kFail, std::move(d)}; }

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---- 1: filter cascade against the brute-force oracle ----

Outcome filter_oracle() {
  std::mt19937_64 rng(101);
  const auto start = Clock::now();
  const std::uint64_t noise_choices[] = {1, 7, 100, 1000, 5000, 20000};
  const std::uint64_t ref_choices[] = {1, 3, 50, 1000, 4000};
  std::size_t decisions = 0, mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    FilterConfig cfg;
    cfg.theta_noise_us = noise_choices[rng() % 6];
    cfg.theta_ref_us = ref_choices[rng() % 5];
    // Gaps small enough that many events fall inside both windows; zero
    // gaps and exact-threshold differences show up often.
    const std::uint64_t max_gap = std::max<std::uint64_t>(2, std::min(cfg.theta_noise_us, cfg.theta_ref_us) / 8);
    const SensorGeometry g{8 + int(rng() % 30), 8 + int(rng() % 40)};
    const auto s = testing::random_stream(rng, g, 10'000, max_gap, 0.15, 0.4);
    const auto want = testing::cascade_oracle(s.events, cfg);

    EventFilter f(g, cfg);
    std::vector<Event> kept;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool got = f.accept(s.events[i]);
      mismatches += got != want[i];
      if (want[i]) kept.push_back(s.events[i]);
    }
    decisions += s.size();
    if (cascade(s, cfg).events != kept) ++mismatches;
  }
  const double t = seconds_since(start);
  return check(mismatches == 0 && t < 10.0, std::to_string(decisions) + " decisions, " + std::to_string(mismatches) +
                                                " mismatches, " + fmt(t, 2) + " s");
}

// ---- 2: incremental RECT against batch pooling ----

Outcome rect_batch() {
  std::mt19937_64 rng(202);
  const std::size_t sizes[] = {2, 100, 5000};
  std::size_t checks = 0, bad = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    RectConfig cfg;
    cfg.fifo_size = sizes[seq % 3];
    cfg.cell_rows = 1 + int(rng() % 3);
    cfg.cell_cols = 1 + int(rng() % 3);
    cfg.normalize = false;
    const SensorGeometry g{5 + int(rng() % 40), 5 + int(rng() % 50)};
    const std::size_t n = cfg.fifo_size + rng() % (2 * cfg.fifo_size + 50);
    const auto s = testing::random_stream(rng, g, n, 3);
    RectState r(g, cfg);
    std::vector<Event> pushed;
    const std::size_t stride = std::max<std::size_t>(1, n / 16);
    for (std::size_t i = 0; i < n; ++i) {
      r.push(s.events[i]);
      pushed.push_back(s.events[i]);
      std::uint64_t sum_c = 0, sum_r = 0;
      if (i % stride != 0 && i + 1 != n) continue;
      for (auto v : r.counts()) sum_c += v;
      for (auto v : r.cell_sums()) sum_r += v;
      ++checks;
      if (sum_c != std::min(pushed.size(), cfg.fifo_size) || sum_r != sum_c) ++bad;
      const auto b = testing::batch_rect(pushed, g, cfg);
      if (!std::equal(b.cells.begin(), b.cells.end(), r.cell_sums().begin(), r.cell_sums().end()) ||
          !std::equal(b.counts.begin(), b.counts.end(), r.counts().begin(), r.counts().end())) {
        ++bad;
      }
    }
  }
  return check(bad == 0, "1000 sequences, " + std::to_string(checks) + " checkpoints, " + std::to_string(bad) +
                             " failures");
}

// ---- 3: k-d tree self-retrieval and depth ----

int ceil_log2(std::size_t k) {
  int b = 0;
  while ((std::size_t{1} << b) < k) ++b;
  return b;
}

FeatureMatrix uniform_points(std::mt19937_64& rng, int k, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix m(k, d);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = u(rng);
  return m;
}

Outcome tree_self_retrieval() {
  std::mt19937_64 rng(303);
  std::ostringstream detail;
  bool ok = true;
  for (int k : {16, 950, 3000}) {
    for (int d : {5, 81}) {
      const auto p = uniform_points(rng, k, d);
      const auto t = KdTree::build(p);
      int hits = 0;
      for (int i = 0; i < k; ++i) hits += t.descend({p.row(i).data(), std::size_t(d)}) == i;
      const bool depth_ok = t.depth() <= ceil_log2(std::size_t(k)) + 1;
      ok = ok && hits == k && depth_ok;
      detail << "K=" << k << "/" << d << "D " << hits << "/" << k << " depth " << t.depth() << "; ";
    }
  }
  return check(ok, detail.str());
}

// ---- 4: vPCA structural identity ----

Outcome vpca_identity() {
  std::mt19937_64 rng(404);
  int same = 0;
  std::size_t kept_total = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 5 + int(rng() % 77);
    const int k = 16 + int(rng() % 1000);
    const auto p = uniform_points(rng, k, d);
    const auto a = KdTree::build(p);
    const auto vp = harvest_dims(a);
    kept_total += vp.kept_dims.size();
    const auto b = KdTree::build(vp.apply(p));
    std::vector<int> relabel(std::size_t(d), -1);
    for (std::size_t i = 0; i < vp.kept_dims.size(); ++i) relabel[std::size_t(vp.kept_dims[i])] = int(i);
    same += structurally_equal(a, b, relabel);
  }
  return check(same == 50, std::to_string(same) + "/50 identical, mean kept dims " + fmt(kept_total / 50.0, 1));
}

// ---- 5: streaming scorer against batch window scores ----

Outcome streaming_identity() {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> gauss;
  std::size_t steps = 0, fixed_bad = 0;
  double worst = 0.0;
  for (std::size_t window : {std::size_t{10'000}, std::size_t{777}}) {
    const int classes = 3, k = 150;
    SvmModel m;
    m.weights.resize(classes, k);
    m.bias.resize(classes);
    for (int c = 0; c < classes; ++c) {
      for (int j = 0; j < k; ++j) m.weights(c, j) = gauss(rng);
      m.bias(c) = 0.2 * gauss(rng);
    }
    const auto w = export_streaming(m, window);
    StreamScorer fl(w, ScoreMode::kFloat), fx(w, ScoreMode::kFixed);
    std::deque<int> live;
    std::vector<std::uint32_t> counts(k, 0);
    std::uniform_int_distribution<int> leaf(0, k - 1);
    for (int i = 0; i < 100'000; ++i) {
      const int l = leaf(rng);
      fl.push(l);
      fx.push(l);
      live.push_back(l);
      ++counts[std::size_t(l)];
      if (live.size() > window) {
        --counts[std::size_t(live.front())];
        live.pop_front();
      }
      for (int c = 0; c < classes; ++c) {
        double want = 0.0;
        std::int64_t want_fixed = 0;
        for (int j = 0; j < k; ++j) {
          if (counts[std::size_t(j)] == 0) continue;
          const double inc = (m.weights(c, j) + m.bias(c)) / double(window);
          want += counts[std::size_t(j)] * inc;
          want_fixed += std::int64_t(counts[std::size_t(j)]) * std::llround(inc * w.fixed_scale);
        }
        worst = std::max(worst, std::abs(fl.float_sums()[std::size_t(c)] - want));
        fixed_bad += fx.fixed_sums()[std::size_t(c)] != want_fixed;
      }
      ++steps;
    }
  }
  return check(fixed_bad == 0 && worst <= 1e-9, std::to_string(steps) + " steps, integer mismatches " +
                                                      std::to_string(fixed_bad) + ", max float error " +
                                                      [&] {
                                                        std::ostringstream os;
                                                        os << std::scientific << std::setprecision(2) << worst;
                                                        return os.str();
                                                      }());
}

// ---- 6: heat-map trace against batch replay ----

Outcome heat_trace() {
  std::mt19937_64 rng(606);
  int same = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SensorGeometry g{6 + int(rng() % 60), 6 + int(rng() % 80)};
    const int k = 20;
    std::vector<std::int32_t> marks;
    for (int j = 0; j < k; ++j) {
      if (rng() % 3 == 0) marks.push_back(j);
    }
    const auto model = DetectorModel::from_landmarks(marks, k);
    const auto s = testing::random_stream(rng, g, 10'000, 3, 0.1, 0.5);
    std::uniform_int_distribution<int> leaf(0, k - 1);
    HeatMapState h(g);
    std::vector<PixelCoord> hits;
    for (const auto& e : s.events) {
      const int l = leaf(rng);
      h.update(model, e, l);
      if (model.contains(l)) hits.push_back({e.x, e.y});
    }
    const auto o = testing::heat_oracle(hits);
    same += h.threshold() == o.threshold && h.fifo() == o.fifo && h.detect() == o.mean;
  }
  return check(same == 100, std::to_string(same) + "/100 windows identical");
}

// ---- 7: packed node round trip ----

Outcome packed_round_trip() {
  std::mt19937_64 rng(707);
  int ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + int(rng() % 600);
    const int d = 1 + int(rng() % 16);
    const auto t = KdTree::build(uniform_points(rng, k, d));
    const auto p = pack(t, PackLayout::kStrict49);
    bool good = p.word_bits() == 49;
    for (auto w : p.words) good = good && (w >> 49) == 0;
    good = good && structurally_equal(unpack(p), quantize_splits(t));
    PackedTree reread = p;
    reread.words = read_rom_hex(write_rom_hex(p), PackLayout::kStrict49);
    good = good && structurally_equal(unpack(reread), unpack(p));
    ok += good;
  }
  return check(ok == 1000, std::to_string(ok) + "/1000 trees");
}

// ---- 8: synthetic end to end ----

struct Recording {
  LabeledStream data;
  bool test = false;
};

std::vector<Recording> synthetic_recordings(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xs(40, 200), ys(40, 140);
  std::vector<Recording> out;
  const int per_class = 16;  // 12 train, 4 test
  for (Shape shape : {Shape::kBar, Shape::kCross, Shape::kRing}) {
    for (int r = 0; r < per_class; ++r) {
      SceneSpec s;
      s.shape = shape;
      s.size = 20;
      s.duration_us = 2'000'000;
      s.event_rate = 80'000;
      s.noise_rate = 8'000;  // 10% background noise
      s.x0 = xs(rng);
      s.y0 = ys(rng);
      s.vx = (xs(rng) - s.x0) / 2.0;
      s.vy = (ys(rng) - s.y0) / 2.0;
      auto scene = synth_scene(s, rng());
      Recording rec;
      rec.data.label = std::string(to_string(shape));
      rec.data.source = rec.data.label + "_" + std::to_string(r);
      rec.data.stream = std::move(scene.stream);
      rec.data.ground_truth = std::move(scene.track);
      rec.test = r >= per_class - 4;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

PipelineConfig synthetic_config(bool normalize) {
  PipelineConfig c;
  c.reduction = Reduction::kVpca;
  c.dictionary_size = 150;
  c.window_size = 10'000;
  c.sample_cap = 30'000;
  c.kmeans_iterations = 40;
  c.rect.normalize = normalize;
  return c;
}

struct EndToEnd {
  Model model;
  std::vector<LabeledStream> test;
  std::size_t windows = 0, correct = 0;
  DetectionMetrics detection;
  double seconds = 0.0;
};

EndToEnd run_end_to_end(bool normalize) {
  const auto start = Clock::now();
  EndToEnd r;
  std::vector<LabeledStream> train;
  for (auto& rec : synthetic_recordings(808)) (rec.test ? r.test : train).push_back(std::move(rec.data));
  r.model = train_model(synthetic_config(normalize), train);
  std::size_t in_box = 0, detections = 0, gt_windows = 0;
  for (const auto& ls : r.test) {
    const auto windows = run_stream(r.model, ls.stream);
    std::vector<WindowDetection> dets;
    for (const auto& w : windows) {
      ++r.windows;
      r.correct += r.model.svm.class_names[std::size_t(w.classification.label)] == ls.label;
      dets.push_back({w.t_end, w.position});
    }
    const auto m = evaluate(dets, ls.ground_truth);
    in_box += m.in_box;
    detections += m.detections;
    gt_windows += m.gt_windows;
  }
  r.detection = metrics_from_tallies(in_box, detections, gt_windows);
  r.seconds = seconds_since(start);
  return r;
}

// ---- 9: N-MNIST ----

std::vector<LabeledStream> nmnist_split(const std::filesystem::path& dir) {
  std::vector<LabeledStream> out;
  for (int digit = 0; digit < 10; ++digit) {
    const auto sub = dir / std::to_string(digit);
    if (!std::filesystem::is_directory(sub)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(sub)) {
      if (f.path().extension() == ".bin") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.push_back({std::to_string(digit), load_events(f, SensorGeometry{34, 34}), {}, f.string()});
    }
  }
  return out;
}

Outcome nmnist() {
  const char* env = std::getenv("PCARECT_NMNIST_DIR");
  if (!env || !*env) return {Status::kSkip, "PCARECT_NMNIST_DIR not set; dataset absent"};
  const std::filesystem::path root(env);
  const auto train = nmnist_split(root / "Train");
  const auto test = nmnist_split(root / "Test");
  if (train.empty() || test.empty()) return {Status::kSkip, "no Train/ or Test/ samples under " + root.string()};
  PipelineConfig c;
  c.geometry = {34, 34};
  c.reduction = Reduction::kPca;
  c.dictionary_size = 3000;
  c.window_size = 0;  // one classification per sample
  const Model m = train_model(c, train, nullptr, &std::cerr);
  std::vector<int> correct(test.size(), 0);
  parallel_for(test.size(), 0, [&](std::size_t i) {
    const auto w = run_stream(m, test[i].stream);
    correct[i] = !w.empty() && m.svm.class_names[std::size_t(w.back().classification.label)] == test[i].label;
  });
  const double acc = double(std::count(correct.begin(), correct.end(), 1)) / double(test.size());
  return check(acc >= 0.965, "test accuracy " + fmt(acc * 100, 2) + "% on " + std::to_string(test.size()) +
                                 " samples (reported 98.95%, floor 96.5%)");
}

// ---- 10: metric arithmetic ----

Outcome metric_arithmetic() {
  const auto m = metrics_from_tallies(498, 727, 729);
  const bool ok = std::lround(m.precision * 1000) == 685 && std::lround(m.recall * 1000) == 683;
  return check(ok, "precision " + fmt(m.precision) + ", recall " + fmt(m.recall));
}

// ---- 11: software throughput with the linearity check ----

Outcome bench_linearity(const Model& model, const EventStream& stream) {
  const auto r = cli::run_bench(model, stream, 1'000'000, true);
  std::ostringstream d;
  d << r.events << " events, " << fmt(r.events_per_second / 1e6, 2) << " M events/s, p50 " << fmt(r.p50_ns, 0)
    << " ns, p99 " << fmt(r.p99_ns, 0) << " ns, 2N/N wall ratio " << fmt(r.linearity_ratio, 2)
    << " (FPGA 550 ns/event figure not reproducible in software)";
  return check(r.linear, d.str());
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    failures += o.status == Status::kFail;
    std::cout << tag << " " << id << " " << name << ": " << o.detail << std::endl;
  };

  report("1", "filter oracle equivalence", filter_oracle);
  report("2", "RECT incremental/batch equivalence", rect_batch);
  report("3", "k-d tree self-retrieval", tree_self_retrieval);
  report("4", "vPCA structural identity", vpca_identity);
  report("5", "streaming classifier identity", streaming_identity);
  report("6", "heat-map trace equivalence", heat_trace);
  report("7", "packed node round trip", packed_round_trip);

  std::optional<EndToEnd> e2e;
  report("8", "synthetic end-to-end", [&] {
    e2e = run_end_to_end(true);
    const double acc = e2e->windows ? double(e2e->correct) / double(e2e->windows) : 0.0;
    return check(acc >= 0.9 && e2e->detection.precision >= 0.8 && e2e->seconds < 120.0,
                 "window accuracy " + fmt(acc) + " (" + std::to_string(e2e->correct) + "/" +
                     std::to_string(e2e->windows) + "), detection precision " + fmt(e2e->detection.precision) +
                     ", recall " + fmt(e2e->detection.recall) + ", " + fmt(e2e->seconds, 1) + " s");
  });
  report("8b", "float/hardware profile agreement", [&] {
    const auto start = Clock::now();
    EndToEnd raw = run_end_to_end(false);
    Model hw = raw.model;
    set_profile(hw, Profile::kHardware);
    std::size_t same = 0, total = 0;
    for (const auto& ls : raw.test) {
      const auto a = run_stream(raw.model, ls.stream);
      const auto b = run_stream(hw, ls.stream);
      for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        same += a[i].classification.label == b[i].classification.label;
      }
      total += std::max(a.size(), b.size());
    }
    const double agree = total ? double(same) / double(total) : 0.0;
    return check(agree >= 0.95, "labels agree on " + std::to_string(same) + "/" + std::to_string(total) +
                                    " windows (" + fmt(agree) + "), layout " +
                                    std::string(to_string(hw.packed->layout)) + ", " +
                                    fmt(seconds_since(start), 1) + " s");
  });
  report("9", "N-MNIST reproduction", nmnist);
  report("10", "metric arithmetic", metric_arithmetic);
  report("11", "software bench linearity", [&] {
    if (!e2e) return fail("no model from criterion 8");
    return bench_linearity(e2e->model, e2e->test.front().stream);
  });

  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failures ? 1 : 0;
}
