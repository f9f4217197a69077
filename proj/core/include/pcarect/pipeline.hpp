#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pcarect/classifier.hpp"
#include "pcarect/config.hpp"
#include "pcarect/detector.hpp"
#include "pcarect/dictionary.hpp"
#include "pcarect/filtering.hpp"
#include "pcarect/kdtree.hpp"
#include "pcarect/packed_tree.hpp"
#include "pcarect/rect.hpp"

namespace pcarect {

// Everything produced by training; serialized as one bundle file.
struct Model {
  PipelineConfig config;
  Dictionary dictionary;
  KdTree tree;
  std::optional<PackedTree> packed;
  SvmModel svm;
  std::vector<DetectorModel> detectors;  // one per class, may be empty
};

// Switches a trained model to another inference profile. The hardware
// profile needs a packed tree and a model trained on unnormalized
// descriptors; anything else is a ConfigError.
void set_profile(Model& model, Profile profile);

// Noise filtering followed by the RECT window. push() returns true when the
// event survives the filters; descriptor() then holds its RECT patch.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const PipelineConfig& config);

  bool push(const Event& e);
  std::span<const double> descriptor() const noexcept { return descriptor_; }
  const RectState& rect() const noexcept { return rect_; }
  void reset();

 private:
  bool filter_enabled_;
  EventFilter filter_;
  RectState rect_;
  std::vector<double> descriptor_;
};

// Feature transform plus backtracking-free dictionary lookup. With a packed
// tree the quantized hardware descent is used.
class Matcher {
 public:
  Matcher(const FeatureTransform& transform, const KdTree& tree, const PackedTree* packed = nullptr);

  std::int32_t match(std::span<const double> descriptor);
  std::span<const double> feature() const noexcept { return feature_; }

 private:
  const FeatureTransform* transform_;
  const KdTree* tree_;
  const PackedTree* packed_;
  std::vector<double> feature_;
};

struct WindowResult {
  std::size_t index = 0;
  std::uint64_t t_end = 0;
  std::size_t events = 0;  // filtered events in the window
  Classification classification;
  std::optional<PixelCoord> position;  // detection for the predicted class
  std::uint32_t threshold = 0;
  std::uint64_t landmark_hits = 0;
};

// Streaming recognizer over one event stream. Windows hold S filtered
// events and do not overlap; with S = 0 the whole stream is one window,
// emitted by finish().
class Pipeline {
 public:
  explicit Pipeline(const Model& model);
  // The scorer points into weights_, so the object stays put.
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  std::optional<WindowResult> push(const Event& e);
  std::optional<WindowResult> finish();

  // Called when a window closes, before the per-window state is cleared.
  using WindowObserver = std::function<void(const WindowResult&, const Pipeline&)>;
  void on_window(WindowObserver observer) { observer_ = std::move(observer); }

  // Leaf of the last accepted event, or -1 if it was filtered out.
  std::int32_t last_leaf() const noexcept { return last_leaf_; }
  const FeatureExtractor& extractor() const noexcept { return extractor_; }
  const HeatMapState* heat_map(std::size_t class_index) const;
  const Histogram& histogram() const noexcept { return histogram_; }
  const StreamScorer* scorer() const noexcept { return scorer_ ? &*scorer_ : nullptr; }

 private:
  WindowResult close_window(std::uint64_t t_end);

  const Model* model_;
  bool hardware_;
  FeatureExtractor extractor_;
  Matcher matcher_;
  StreamingWeights weights_;
  std::optional<StreamScorer> scorer_;
  Histogram histogram_;
  std::size_t filled_ = 0;
  std::vector<HeatMapState> heat_;
  std::size_t window_index_ = 0;
  std::uint64_t last_t_ = 0;
  std::int32_t last_leaf_ = -1;
  WindowObserver observer_;
};

std::vector<WindowResult> run_stream(const Model& model, const EventStream& stream);

}  // namespace pcarect
