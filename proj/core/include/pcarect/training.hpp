#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pcarect/config.hpp"
#include "pcarect/event_io.hpp"
#include "pcarect/pipeline.hpp"

namespace pcarect {

struct LabeledStream {
  std::string label;
  EventStream stream;
  std::vector<GroundTruthBox> ground_truth;  // empty: every event is target
  std::string source;                        // used in error messages
};

struct TrainingReport {
  std::size_t events = 0;
  std::size_t descriptors = 0;  // filtered events with a descriptor
  std::size_t sampled = 0;
  std::size_t feature_dim = 0;  // d' after reduction
  std::vector<int> kept_dims;   // vPCA only
  double pca_energy = 0.0;      // PCA only
  std::size_t dictionary_size = 0;
  int kmeans_iterations = 0;
  double kmeans_inertia = 0.0;
  int tree_depth = 0;
  std::string pack_layout;      // empty when the tree could not be packed
  std::string pack_note;        // why the strict layout was not used
  std::size_t training_windows = 0;
  double training_accuracy = 0.0;
  std::vector<std::size_t> landmark_counts;
};

// Runs fn(i) for i in [0, n) on up to `lanes` worker threads (0 picks the
// hardware concurrency). The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t lanes, const std::function<void(std::size_t)>& fn);

// Full learning stage: descriptor sampling, reduction, dictionary, tree,
// classifier and landmarks. Class names are the sorted distinct labels.
// Errors are rethrown with the stage name and, where known, the source file.
Model train_model(PipelineConfig config, std::span<const LabeledStream> data,
                  TrainingReport* report = nullptr, std::ostream* log = nullptr,
                  std::size_t lanes = 0);

}  // namespace pcarect
