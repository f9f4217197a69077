#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pcarect/bundle.hpp"
#include "pcarect/error.hpp"
#include "pcarect/event_io.hpp"
#include "pcarect/filtering.hpp"
#include "pcarect/packed_tree.hpp"
#include "pcarect/pgm.hpp"
#include "pcarect/synth.hpp"
#include "pcarect/training.hpp"

namespace fs = std::filesystem;

namespace pcarect::cli {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(g.config_path);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    try {
      cfg = PipelineConfig::parse(text);
    } catch (const Error& e) {
      throw ConfigError(g.config_path + ": " + e.what());
    }
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.profile) cfg.profile = parse_profile(*g.profile);
  cfg.validate();
  return cfg;
}

Model load_model(const std::string& path, const Globals& g) {
  Model m = load_bundle_file(path);
  if (g.profile) set_profile(m, parse_profile(*g.profile));
  return m;
}

// Writes to the named file, or to `fallback` when the name is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot write " + path);
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::vector<LabeledStream> load_manifest(const std::string& path, const SensorGeometry& geometry) {
  const std::string text = read_text_file(path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<LabeledStream> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) {
      const auto b = c.find_first_not_of(" \t");
      const auto e = c.find_last_not_of(" \t");
      cols.push_back(b == std::string::npos ? std::string() : c.substr(b, e - b + 1));
    }
    if (cols.size() < 2 || cols.size() > 3 || cols[0].empty() || cols[1].empty()) {
      throw Error(path + ": line " + std::to_string(line_no) + ": expected 'label,events[,ground_truth]'");
    }
    LabeledStream s;
    s.label = cols[0];
    s.source = (base / cols[1]).string();
    s.stream = load_events(s.source, geometry);
    if (cols.size() == 3 && !cols[2].empty()) {
      const auto gt_path = (base / cols[2]).string();
      try {
        s.ground_truth = parse_ground_truth_csv(read_text_file(gt_path));
      } catch (const Error& e) {
        throw Error(gt_path + ": " + e.what());
      }
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(path + ": manifest lists no streams");
  return out;
}

std::vector<EventStream> load_inputs(const std::vector<std::string>& paths, const SensorGeometry& geometry,
                                     std::size_t lanes) {
  std::vector<EventStream> streams(paths.size());
  parallel_for(paths.size(), lanes, [&](std::size_t i) { streams[i] = load_events(paths[i], geometry); });
  return streams;
}

// ---- subcommands ----

int cmd_filter(const Globals& g, const std::string& input, const std::string& output,
               std::optional<std::uint64_t> theta_noise, std::optional<std::uint64_t> theta_ref, std::ostream& out,
               std::ostream& err) {
  PipelineConfig cfg = load_config(g);
  if (theta_noise) cfg.filter.theta_noise_us = *theta_noise;
  if (theta_ref) cfg.filter.theta_ref_us = *theta_ref;
  cfg.filter.validate();
  const EventStream in = load_events(input, cfg.geometry);
  const EventStream kept = cascade(in, cfg.filter);
  Output o(output, out);
  write_csv(o.stream(), kept.events);
  err << "filter: kept " << kept.size() << " of " << in.size() << " events\n";
  return kOk;
}

int cmd_synth(const Globals& g, const std::string& spec_path, const std::string& events_out,
              const std::string& gt_out, std::ostream& out, std::ostream& err) {
  SceneSpec spec;
  try {
    spec = SceneSpec::parse(read_text_file(spec_path));
  } catch (const Error& e) {
    throw ConfigError(spec_path + ": " + e.what());
  }
  const SyntheticScene scene = synth_scene(spec, g.seed.value_or(1));
  Output o(events_out, out);
  write_csv(o.stream(), scene.stream.events);
  if (!gt_out.empty()) write_text_file(gt_out, write_ground_truth_csv(scene.track));
  err << "synth: " << scene.stream.size() << " events, " << scene.track.size() << " boxes\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::string& manifest, const std::string& bundle_out,
              const std::string& text_out, std::size_t lanes, std::ostream& out) {
  const PipelineConfig cfg = load_config(g);
  const auto data = load_manifest(manifest, cfg.geometry);
  TrainingReport report;
  const auto start = Clock::now();
  Model model = train_model(cfg, data, &report, &out, lanes);
  save_bundle_file(bundle_out, model);
  if (!text_out.empty()) write_text_file(text_out, export_text_bundle(model));
  out << "trained on " << data.size() << " streams in " << std::fixed << std::setprecision(2)
      << elapsed_ns(start, Clock::now()) * 1e-9 << " s, wrote " << bundle_out << '\n';
  out.unsetf(std::ios::floatfield);
  return kOk;
}

int cmd_classify(const Globals& g, const std::string& bundle, const std::vector<std::string>& inputs,
                 const std::string& output, std::size_t lanes, std::ostream& out) {
  const Model model = load_model(bundle, g);
  const auto streams = load_inputs(inputs, model.config.geometry, lanes);
  const bool tagged = inputs.size() > 1;
  std::vector<std::string> blocks(inputs.size());
  parallel_for(inputs.size(), lanes, [&](std::size_t i) {
    std::ostringstream os;
    for (const auto& w : run_stream(model, streams[i])) {
      if (tagged) os << inputs[i] << ',';
      os << w.t_end << ',' << model.svm.class_names[static_cast<std::size_t>(w.classification.label)];
      for (double s : w.classification.scores) os << ',' << format_double(s);
      os << '\n';
    }
    blocks[i] = os.str();
  });
  Output o(output, out);
  if (tagged) o.stream() << "source,";
  o.stream() << "window_end_timestamp,label";
  for (const auto& n : model.svm.class_names) o.stream() << ",score_" << n;
  o.stream() << '\n';
  for (const auto& b : blocks) o.stream() << b;
  return kOk;
}

void dump_window(const fs::path& dir, const WindowResult& w, const Pipeline& p) {
  std::ostringstream prefix;
  prefix << "window_" << std::setw(6) << std::setfill('0') << w.index;
  const RectState& rect = p.extractor().rect();
  const auto& geo = rect.geometry();
  write_text_file(dir / (prefix.str() + "_C.pgm"), encode_pgm(rect.counts(), geo.rows, geo.cols));
  write_text_file(dir / (prefix.str() + "_R.pgm"), encode_pgm(rect.cell_sums(), rect.grid_rows(), rect.grid_cols()));
  if (const HeatMapState* h = p.heat_map(static_cast<std::size_t>(w.classification.label))) {
    write_text_file(dir / (prefix.str() + "_heat.pgm"), encode_pgm(h->counts(), geo.rows, geo.cols));
  }
}

int cmd_detect(const Globals& g, const std::string& bundle, const std::string& input, const std::string& gt_path,
               const std::string& output, const std::string& dump_dir, std::ostream& out, std::ostream& err) {
  const Model model = load_model(bundle, g);
  const EventStream stream = load_events(input, model.config.geometry);
  std::vector<GroundTruthBox> gt;
  if (!gt_path.empty()) gt = parse_ground_truth_csv(read_text_file(gt_path));
  if (!dump_dir.empty()) fs::create_directories(dump_dir);

  Pipeline pipeline(model);
  if (!dump_dir.empty()) {
    pipeline.on_window([&](const WindowResult& w, const Pipeline& p) { dump_window(dump_dir, w, p); });
  }
  std::vector<WindowResult> windows;
  for (const auto& e : stream.events) {
    if (auto w = pipeline.push(e)) windows.push_back(std::move(*w));
  }
  if (auto w = pipeline.finish()) windows.push_back(std::move(*w));

  Output o(output, out);
  o.stream() << "window_end_timestamp,x_obj,y_obj,threshold,landmark_hit_count\n";
  std::vector<WindowDetection> detections;
  for (const auto& w : windows) {
    o.stream() << w.t_end << ',';
    if (w.position) o.stream() << w.position->x << ',' << w.position->y;
    else o.stream() << ',';
    o.stream() << ',' << w.threshold << ',' << w.landmark_hits << '\n';
    detections.push_back(WindowDetection{w.t_end, w.position});
  }
  if (!gt_path.empty()) {
    const DetectionMetrics m = evaluate(detections, gt);
    err << "detections " << m.detections << ", in box " << m.in_box << ", ground-truth windows " << m.gt_windows
        << ", precision " << m.precision << (m.precision_defined ? "" : " (undefined)") << ", recall " << m.recall
        << '\n';
  }
  return kOk;
}

int cmd_bench(const Globals& g, const std::string& bundle, const std::string& input, std::size_t min_events,
              std::ostream& out) {
  const Model model = load_model(bundle, g);
  const EventStream stream = load_events(input, model.config.geometry);
  out << format_bench(run_bench(model, stream, min_events));
  return kOk;
}

int cmd_tree_dump(const Globals& g, const std::string& bundle, const std::string& format, std::ostream& out) {
  const Model model = load_model(bundle, g);
  if (format == "rom") {
    if (!model.packed) throw Error("model has no packed tree");
    out << write_rom_hex(*model.packed);
  } else if (format == "bundle") {
    out << export_text_bundle(model);
  } else {
    const KdTree& t = model.tree;
    out << "# " << t.nodes().size() << " nodes, " << t.point_count() << " leaves, dim " << t.dim() << ", depth "
        << t.depth();
    if (model.packed) out << ", packed " << to_string(model.packed->layout);
    out << "\nnode,kind,split_dim,split_val,left,right,leaf_index\n";
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const KdNode& n = t.nodes()[i];
      if (n.leaf) {
        out << i << ",leaf,,,,," << n.leaf_index << '\n';
      } else {
        out << i << ",split," << n.split_dim << ',' << format_double(n.split_val) << ',' << n.left << ','
            << n.right << ",\n";
      }
    }
  }
  return kOk;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::vector<Event> replay(const EventStream& stream, std::size_t n) {
  std::vector<Event> out;
  out.reserve(n);
  const std::uint64_t period = stream.events.back().t + 1;
  for (std::uint64_t rep = 0; out.size() < n; ++rep) {
    for (const auto& e : stream.events) {
      if (out.size() == n) break;
      Event r = e;
      r.t += rep * period;
      out.push_back(r);
    }
  }
  return out;
}

double time_pipeline(const Model& model, std::span<const Event> events) {
  Pipeline p(model);
  const auto a = Clock::now();
  for (const auto& e : events) (void)p.push(e);
  return elapsed_ns(a, Clock::now());
}

}  // namespace

BenchReport run_bench(const Model& model, const EventStream& stream, std::size_t min_events, bool check_linearity) {
  BenchReport r;
  if (stream.empty() || min_events == 0) return r;
  const std::size_t n = std::max(min_events, stream.size());
  const std::vector<Event> events = replay(stream, check_linearity ? 2 * n : n);
  const std::span<const Event> first(events.data(), n);

  // End to end, one clock read pair per event.
  std::vector<double> latency;
  latency.reserve(n);
  Pipeline pipeline(model);
  std::uint64_t digest = 0;
  const auto start = Clock::now();
  for (const auto& e : first) {
    const auto a = Clock::now();
    auto w = pipeline.push(e);
    latency.push_back(elapsed_ns(a, Clock::now()));
    if (pipeline.last_leaf() >= 0) ++r.accepted;
    if (w) {
      ++r.windows;
      digest = mix(digest, static_cast<std::uint64_t>(w->classification.label));
    }
  }
  if (auto w = pipeline.finish()) {
    ++r.windows;
    digest = mix(digest, static_cast<std::uint64_t>(w->classification.label));
  }
  r.seconds = elapsed_ns(start, Clock::now()) * 1e-9;
  r.events = n;
  r.label_digest = digest;
  r.events_per_second = r.seconds > 0.0 ? static_cast<double>(n) / r.seconds : 0.0;
  auto nth = [&](double q) {
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(latency.size()))) - 1;
    idx = std::min(idx, latency.size() - 1);
    std::nth_element(latency.begin(), latency.begin() + static_cast<std::ptrdiff_t>(idx), latency.end());
    return latency[idx];
  };
  r.p50_ns = nth(0.50);
  r.p99_ns = nth(0.99);

  // Per-stage breakdown with the stages run by hand.
  {
    const PipelineConfig& cfg = model.config;
    EventFilter filter(cfg.geometry, cfg.filter);
    RectState rect(cfg.geometry, cfg.rect);
    std::vector<double> descriptor(cfg.rect.dimension());
    const PackedTree* packed = cfg.profile == Profile::kHardware ? &*model.packed : nullptr;
    Matcher matcher(model.dictionary.transform, model.tree, packed);
    const auto weights = export_streaming(model.svm, std::max<std::size_t>(cfg.window_size, 1));
    StreamScorer scorer(weights, cfg.profile == Profile::kHardware ? ScoreMode::kFixed : ScoreMode::kFloat);
    std::vector<HeatMapState> heat;
    for (std::size_t c = 0; c < model.detectors.size(); ++c) heat.emplace_back(cfg.geometry);
    double t_filter = 0, t_rect = 0, t_match = 0, t_score = 0;
    std::size_t kept = 0;
    for (const auto& e : first) {
      const auto a = Clock::now();
      const bool ok = !cfg.filter_enabled || filter.accept(e);
      const auto b = Clock::now();
      t_filter += elapsed_ns(a, b);
      if (!ok) continue;
      ++kept;
      rect.push(e);
      rect.extract(e, descriptor);
      const auto c = Clock::now();
      const auto leaf = matcher.match(descriptor);
      const auto d = Clock::now();
      scorer.push(leaf);
      for (std::size_t k = 0; k < heat.size(); ++k) heat[k].update(model.detectors[k], e, leaf);
      const auto f = Clock::now();
      t_rect += elapsed_ns(b, c);
      t_match += elapsed_ns(c, d);
      t_score += elapsed_ns(d, f);
    }
    const double per = kept > 0 ? 1.0 / static_cast<double>(kept) : 0.0;
    r.stages = StageTimes{t_filter / static_cast<double>(n), t_rect * per, t_match * per, t_score * per};
  }

  if (check_linearity) {
    // Best of three for each length; a single pair is at the mercy of the
    // scheduler on a loaded machine.
    double t1 = time_pipeline(model, first), t2 = time_pipeline(model, events);
    for (int rep = 1; rep < 3; ++rep) {
      t1 = std::min(t1, time_pipeline(model, first));
      t2 = std::min(t2, time_pipeline(model, events));
    }
    r.linearity_ratio = t1 > 0.0 ? t2 / t1 : 0.0;
    r.linear = std::abs(r.linearity_ratio - 2.0) <= 0.5;
  }
  return r;
}

std::string format_bench(const BenchReport& r) {
  std::ostringstream os;
  os << "events: " << r.events << '\n'
     << "accepted: " << r.accepted << '\n'
     << "windows: " << r.windows << '\n'
     << "label_digest: " << std::hex << r.label_digest << std::dec << '\n'
     << "seconds: " << r.seconds << '\n'
     << "events_per_second: " << r.events_per_second << '\n'
     << "latency_p50_ns: " << r.p50_ns << '\n'
     << "latency_p99_ns: " << r.p99_ns << '\n'
     << "stage_filter_ns: " << r.stages.filter_ns << '\n'
     << "stage_rect_ns: " << r.stages.rect_ns << '\n'
     << "stage_match_ns: " << r.stages.match_ns << '\n'
     << "stage_score_ns: " << r.stages.score_ns << '\n'
     << "linearity_ratio: " << r.linearity_ratio << (r.linear ? " (ok)" : r.events ? " (outside 2 +/- 25%)" : "")
     << '\n';
  return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PCA-RECT event-camera recognition toolkit"};
  app.name("pcarect");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "random seed (overrides the configuration)");
  app.add_option("--profile", g.profile, "float or hardware")->check(CLI::IsMember({"float", "hardware", "hardware-faithful"}));

  std::string input, output, bundle, gt, extra;
  std::vector<std::string> inputs;
  std::size_t lanes = 0;
  std::size_t min_events = 1'000'000;
  std::string format = "nodes";

  auto* filter = app.add_subcommand("filter", "apply the refractory and noise filters to an event CSV");
  filter->add_option("input", input, "event file (.csv or N-MNIST .bin)")->required();
  filter->add_option("-o,--output", output, "output CSV (default stdout)");
  std::optional<std::uint64_t> theta_noise, theta_ref;
  filter->add_option("--theta-noise-us", theta_noise, "noise filter window (overrides the configuration)");
  filter->add_option("--theta-ref-us", theta_ref, "refractory period (overrides the configuration)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene and its ground truth");
  synth->add_option("spec", input, "scene description (key = value)")->required();
  synth->add_option("-o,--output", output, "event CSV (default stdout)");
  synth->add_option("--gt", gt, "ground-truth CSV to write");

  auto* train = app.add_subcommand("train", "learn a model bundle from a labeled manifest");
  train->add_option("manifest", input, "CSV lines: label,events[,ground_truth]")->required();
  train->add_option("-o,--output", output, "bundle file")->required();
  train->add_option("--export-text", extra, "also write the lossless text form of the bundle");
  train->add_option("--lanes", lanes, "worker threads (0 = all cores)");

  auto* classify = app.add_subcommand("classify", "per-window labels and scores");
  classify->add_option("bundle", bundle, "model bundle")->required();
  classify->add_option("inputs", inputs, "event files")->required();
  classify->add_option("-o,--output", output, "output CSV (default stdout)");
  classify->add_option("--lanes", lanes, "worker threads (0 = all cores)");

  auto* detect = app.add_subcommand("detect", "per-window object position");
  detect->add_option("bundle", bundle, "model bundle")->required();
  detect->add_option("input", input, "event file")->required();
  detect->add_option("--gt", gt, "ground-truth CSV; prints precision and recall");
  detect->add_option("-o,--output", output, "output CSV (default stdout)");
  detect->add_option("--dump-heat", extra, "directory for per-window PGM dumps");

  auto* bench = app.add_subcommand("bench", "per-event latency and throughput");
  bench->add_option("bundle", bundle, "model bundle")->required();
  bench->add_option("input", input, "event file")->required();
  bench->add_option("--min-events", min_events, "replay the input until this many events ran");

  auto* tree = app.add_subcommand("tree", "inspect the dictionary tree");
  tree->require_subcommand(1);
  auto* dump = tree->add_subcommand("dump", "print the tree");
  dump->add_option("bundle", bundle, "model bundle")->required();
  dump->add_option("--format", format, "nodes, rom or bundle")->check(CLI::IsMember({"nodes", "rom", "bundle"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*filter) return cmd_filter(g, input, output, theta_noise, theta_ref, out, err);
    if (*synth) return cmd_synth(g, input, output, gt, out, err);
    if (*train) return cmd_train(g, input, output, extra, lanes, out);
    if (*classify) return cmd_classify(g, bundle, inputs, output, lanes, out);
    if (*detect) return cmd_detect(g, bundle, input, gt, output, extra, out, err);
    if (*bench) return cmd_bench(g, bundle, input, min_events, out);
    if (*dump) return cmd_tree_dump(g, bundle, format, out);
  } catch (const ConfigError& e) {
    err << "pcarect: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "pcarect: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace pcarect::cli
