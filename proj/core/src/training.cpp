#include "pcarect/training.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <queue>
#include <random>
#include <thread>
#include <tuple>

#include "pcarect/error.hpp"

namespace pcarect {

void parallel_for(std::size_t n, std::size_t lanes, const std::function<void(std::size_t)>& fn) {
  if (lanes == 0) lanes = std::max(1u, std::thread::hardware_concurrency());
  lanes = std::min(lanes, n);
  if (lanes <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t l = 0; l < lanes; ++l) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first) std::rethrow_exception(first);
}

namespace {

[[noreturn]] void rethrow_in(const std::string& where) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
}

std::string stage_name(const char* stage, const LabeledStream& s) {
  return std::string("train [") + stage + "] " + (s.source.empty() ? s.label : s.source);
}

// Bottom-k sampling: every descriptor draws a random key and the `cap`
// smallest keys win. The kept set does not depend on the order in which
// streams are visited.
struct Sample {
  std::uint64_t key;
  std::size_t stream;
  std::size_t index;
  std::vector<double> values;

  auto rank() const { return std::tie(key, stream, index); }
};

struct SampleLess {
  bool operator()(const Sample& a, const Sample& b) const { return a.rank() < b.rank(); }
};

class BottomK {
 public:
  explicit BottomK(std::size_t cap) : cap_(cap) {}

  bool wants(std::uint64_t key, std::size_t stream, std::size_t index) const {
    if (heap_.size() < cap_) return true;
    return std::tie(key, stream, index) < heap_.top().rank();
  }
  void offer(Sample s) {
    if (!wants(s.key, s.stream, s.index)) return;
    heap_.push(std::move(s));
    if (heap_.size() > cap_) heap_.pop();
  }
  void merge(BottomK&& other) {
    while (!other.heap_.empty()) {
      offer(std::move(const_cast<Sample&>(other.heap_.top())));
      other.heap_.pop();
    }
  }
  std::vector<Sample> take() {
    std::vector<Sample> out;
    out.reserve(heap_.size());
    while (!heap_.empty()) {
      out.push_back(std::move(const_cast<Sample&>(heap_.top())));
      heap_.pop();
    }
    return out;
  }

 private:
  std::size_t cap_;
  std::priority_queue<Sample, std::vector<Sample>, SampleLess> heap_;
};

struct StreamPass2 {
  std::vector<Histogram> histograms;
  std::vector<std::uint64_t> target;      // own-class target matches
  std::vector<std::uint64_t> background;  // own-class non-target matches
  std::vector<std::uint64_t> all;         // every match
};

// First box covering t, scanning forward from a cursor that only advances.
const GroundTruthBox* covering_box(std::span<const GroundTruthBox> boxes, std::size_t& cursor,
                                   std::uint64_t t) {
  while (cursor < boxes.size() && boxes[cursor].t_end < t) ++cursor;
  for (std::size_t j = cursor; j < boxes.size() && boxes[j].t_begin <= t; ++j) {
    if (boxes[j].covers(t)) return &boxes[j];
  }
  return nullptr;
}

std::optional<PackedTree> try_pack(const KdTree& tree, std::string& layout, std::string& note) {
  note = layout_violation(tree, PackLayout::kStrict49);
  if (note.empty()) {
    layout = std::string(to_string(PackLayout::kStrict49));
    return pack(tree, PackLayout::kStrict49);
  }
  if (layout_violation(tree, PackLayout::kWide64).empty()) {
    layout = std::string(to_string(PackLayout::kWide64));
    return pack(tree, PackLayout::kWide64);
  }
  layout.clear();
  return std::nullopt;
}

}  // namespace

Model train_model(PipelineConfig config, std::span<const LabeledStream> data, TrainingReport* report,
                  std::ostream* log, std::size_t lanes) {
  TrainingReport local;
  TrainingReport& rep = report ? *report : local;
  rep = TrainingReport{};

  try {
    config.validate();
  } catch (...) {
    rethrow_in("train [config]");
  }
  if (data.empty()) throw ConfigError("train: no training streams");

  std::vector<std::string> class_names;
  for (const auto& s : data) class_names.push_back(s.label);
  std::sort(class_names.begin(), class_names.end());
  class_names.erase(std::unique(class_names.begin(), class_names.end()), class_names.end());
  if (class_names.size() < 2) throw ConfigError("train: need at least 2 classes, got " +
                                                std::to_string(class_names.size()));
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels[i] = static_cast<int>(std::lower_bound(class_names.begin(), class_names.end(), data[i].label) -
                                 class_names.begin());
    if (data[i].stream.geometry != config.geometry) {
      throw ConfigError(stage_name("input", data[i]) + ": stream geometry " +
                        std::to_string(data[i].stream.geometry.cols) + "x" +
                        std::to_string(data[i].stream.geometry.rows) + " does not match the configuration");
    }
  }

  // Pass 1: descriptors, uniformly sampled across all streams.
  const std::size_t rect_dim = config.rect.dimension();
  BottomK reservoir(config.sample_cap);
  std::mutex mu;
  std::vector<std::size_t> descriptor_counts(data.size(), 0);
  parallel_for(data.size(), lanes, [&](std::size_t i) {
    try {
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
      std::mt19937_64 rng(seq);
      BottomK mine(config.sample_cap);
      FeatureExtractor fx(config);
      std::size_t index = 0;
      for (const auto& e : data[i].stream.events) {
        if (!fx.push(e)) continue;
        const std::uint64_t key = rng();
        if (mine.wants(key, i, index)) {
          auto d = fx.descriptor();
          mine.offer(Sample{key, i, index, std::vector<double>(d.begin(), d.end())});
        }
        ++index;
      }
      descriptor_counts[i] = index;
      std::lock_guard lock(mu);
      reservoir.merge(std::move(mine));
    } catch (...) {
      rethrow_in(stage_name("descriptors", data[i]));
    }
  });
  for (std::size_t i = 0; i < data.size(); ++i) {
    rep.events += data[i].stream.size();
    rep.descriptors += descriptor_counts[i];
  }
  std::vector<Sample> picked = reservoir.take();
  std::sort(picked.begin(), picked.end(),
            [](const Sample& a, const Sample& b) { return std::tie(a.stream, a.index) < std::tie(b.stream, b.index); });
  rep.sampled = picked.size();
  FeatureMatrix samples(static_cast<Eigen::Index>(picked.size()), static_cast<Eigen::Index>(rect_dim));
  for (std::size_t r = 0; r < picked.size(); ++r) {
    samples.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(picked[r].values.data(), static_cast<Eigen::Index>(rect_dim));
  }
  picked.clear();
  picked.shrink_to_fit();
  if (log) *log << "descriptors: " << rep.descriptors << " from " << rep.events << " events, sampled "
                << rep.sampled << '\n';

  // Reduction, dictionary and tree.
  Model model;
  KMeansOptions km;
  km.max_iterations = config.kmeans_iterations;
  km.seed = config.seed;
  try {
    if (static_cast<std::size_t>(samples.rows()) < static_cast<std::size_t>(config.dictionary_size)) {
      throw Error("only " + std::to_string(samples.rows()) + " descriptors for a dictionary of " +
                  std::to_string(config.dictionary_size));
    }
    FeatureTransform transform = FeatureTransform::identity(rect_dim);
    if (config.reduction == Reduction::kPca) {
      PcaModel pca = fit_pca(samples, PcaTarget{config.pca_energy, config.pca_dims});
      rep.pca_energy = pca.energy_kept;
      transform = FeatureTransform::pca(std::move(pca));
    }
    const FeatureMatrix features = transform.apply(samples);
    samples.resize(0, 0);
    KMeansResult clusters = kmeans(features, config.dictionary_size, km);
    rep.kmeans_iterations = clusters.iterations;
    rep.kmeans_inertia = clusters.inertia_history.empty() ? 0.0 : clusters.inertia_history.back();
    KdTree tree = KdTree::build(clusters.centroids);
    if (config.reduction == Reduction::kVpca) {
      // The tree only ever looks at the dimensions it splits on; dropping the
      // rest gives the same tree over a smaller descriptor.
      VirtualProjection vp = harvest_dims(tree);
      FeatureMatrix projected = vp.apply(clusters.centroids);
      tree = KdTree::build(projected);
      rep.kept_dims = vp.kept_dims;
      model.dictionary = Dictionary{std::move(projected), FeatureTransform::virtual_projection(std::move(vp))};
    } else {
      model.dictionary = Dictionary{std::move(clusters.centroids), std::move(transform)};
    }
    model.tree = std::move(tree);
  } catch (...) {
    rethrow_in("train [dictionary]");
  }
  rep.feature_dim = model.dictionary.transform.output_dim();
  rep.dictionary_size = model.dictionary.size();
  rep.tree_depth = model.tree.depth();
  model.packed = try_pack(model.tree, rep.pack_layout, rep.pack_note);
  if (!model.packed && config.profile == Profile::kHardware) {
    throw Error("train [tree]: tree does not fit any packed layout: " + rep.pack_note);
  }
  if (log) {
    *log << "features: " << to_string(model.dictionary.space()) << ", " << rep.feature_dim << " dims";
    if (config.reduction == Reduction::kPca) *log << " (energy " << rep.pca_energy << ")";
    *log << '\n'
         << "k-means: K=" << rep.dictionary_size << ", " << rep.kmeans_iterations << " iterations, inertia "
         << rep.kmeans_inertia << '\n'
         << "tree: depth " << rep.tree_depth << ", packed "
         << (rep.pack_layout.empty() ? std::string("none") : rep.pack_layout);
    if (!rep.pack_note.empty()) *log << " (strict layout: " << rep.pack_note << ")";
    *log << '\n';
  }

  // Pass 2: window histograms and landmark statistics.
  model.config = config;
  const std::size_t k = model.dictionary.size();
  const PackedTree* packed = config.profile == Profile::kHardware ? &*model.packed : nullptr;
  std::vector<StreamPass2> pass2(data.size());
  parallel_for(data.size(), lanes, [&](std::size_t i) {
    try {
      StreamPass2& out = pass2[i];
      out.target.assign(k, 0);
      out.background.assign(k, 0);
      out.all.assign(k, 0);
      FeatureExtractor fx(config);
      Matcher matcher(model.dictionary.transform, model.tree, packed);
      const std::size_t s = config.window_size > 0 ? config.window_size : SIZE_MAX;
      HistogramAccumulator acc(k, s);
      const auto& gt = data[i].ground_truth;
      std::size_t cursor = 0;
      for (const auto& e : data[i].stream.events) {
        if (!fx.push(e)) continue;
        const std::int32_t leaf = matcher.match(fx.descriptor());
        const auto l = static_cast<std::size_t>(leaf);
        ++out.all[l];
        bool target = gt.empty();
        if (!target) {
          const GroundTruthBox* box = covering_box(gt, cursor, e.t);
          target = box && box->contains(e.x, e.y);
        }
        ++(target ? out.target : out.background)[l];
        if (auto h = acc.add(leaf)) out.histograms.push_back(std::move(*h));
      }
      if (config.window_size == 0 && acc.filled() > 0) {
        out.histograms.push_back(acc.current());
        out.histograms.back().window_size = 0;
      }
    } catch (...) {
      rethrow_in(stage_name("histograms", data[i]));
    }
  });

  std::vector<Histogram> histograms;
  std::vector<int> window_labels;
  const std::size_t classes = class_names.size();
  std::vector<LandmarkStats> stats(classes, LandmarkStats(k));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    for (auto& h : pass2[i].histograms) {
      histograms.push_back(std::move(h));
      window_labels.push_back(labels[i]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      stats[c].pos_matches[j] += pass2[i].target[j];
      stats[c].neg_matches[j] += pass2[i].background[j];
      for (std::size_t o = 0; o < classes; ++o) {
        if (o != c) stats[o].neg_matches[j] += pass2[i].all[j];
      }
    }
  }
  pass2.clear();
  rep.training_windows = histograms.size();

  try {
    SvmOptions so;
    so.lambda = config.svm_lambda;
    so.epochs = config.svm_epochs;
    so.seed = config.seed;
    model.svm = train_svm(histograms, window_labels, class_names, so);
  } catch (...) {
    rethrow_in("train [classifier]");
  }
  std::size_t correct = 0;
  for (std::size_t w = 0; w < histograms.size(); ++w) {
    if (classify(model.svm, histograms[w]).label == window_labels[w]) ++correct;
  }
  rep.training_accuracy = histograms.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(histograms.size());

  for (std::size_t c = 0; c < classes; ++c) {
    const bool any = std::any_of(stats[c].pos_matches.begin(), stats[c].pos_matches.end(),
                                 [](std::uint64_t v) { return v > 0; });
    model.detectors.push_back(any ? select_landmarks(stats[c], config.landmarks)
                                  : DetectorModel::from_landmarks({}, k));
    rep.landmark_counts.push_back(model.detectors.back().count());
  }
  if (log) {
    *log << "classifier: " << classes << " classes, " << rep.training_windows << " windows, training accuracy "
         << rep.training_accuracy << '\n'
         << "landmarks:";
    for (std::size_t c = 0; c < classes; ++c) *log << ' ' << class_names[c] << '=' << rep.landmark_counts[c];
    *log << '\n';
  }
  return model;
}

}  // namespace pcarect
