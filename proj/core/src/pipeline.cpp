#include "pcarect/pipeline.hpp"

#include <algorithm>

#include "pcarect/error.hpp"

namespace pcarect {

FeatureExtractor::FeatureExtractor(const PipelineConfig& config)
    : filter_enabled_(config.filter_enabled),
      filter_(config.geometry, config.filter),
      rect_(config.geometry, config.rect),
      descriptor_(config.rect.dimension(), 0.0) {}

bool FeatureExtractor::push(const Event& e) {
  if (filter_enabled_ && !filter_.accept(e)) return false;
  rect_.push(e);
  rect_.extract(e, descriptor_);
  return true;
}

void FeatureExtractor::reset() {
  filter_.reset();
  rect_.reset();
}

Matcher::Matcher(const FeatureTransform& transform, const KdTree& tree, const PackedTree* packed)
    : transform_(&transform), tree_(&tree), packed_(packed), feature_(transform.output_dim(), 0.0) {
  if (transform.output_dim() != tree.dim()) {
    throw ConfigError("feature transform output (" + std::to_string(transform.output_dim()) +
                      "-D) does not match the tree (" + std::to_string(tree.dim()) + "-D)");
  }
}

std::int32_t Matcher::match(std::span<const double> descriptor) {
  transform_->apply(descriptor, feature_);
  return packed_ ? packed_->descend(feature_) : tree_->descend(feature_);
}

void set_profile(Model& model, Profile profile) {
  if (profile == Profile::kHardware) {
    if (!model.packed) throw ConfigError("hardware profile needs a packed tree; this model has none");
    if (model.config.rect.normalize) {
      throw ConfigError("hardware profile runs on unnormalized descriptors; retrain with normalize = off");
    }
  }
  model.config.profile = profile;
}

namespace {

const PackedTree* hardware_tree(const Model& model) {
  if (model.config.profile != Profile::kHardware) return nullptr;
  if (!model.packed) throw Error("hardware profile requires a packed tree in the model");
  return &*model.packed;
}

}  // namespace

Pipeline::Pipeline(const Model& model)
    : model_(&model),
      hardware_(model.config.profile == Profile::kHardware),
      extractor_(model.config),
      matcher_(model.dictionary.transform, model.tree, hardware_tree(model)),
      weights_(export_streaming(model.svm, std::max<std::size_t>(model.config.window_size, 1))) {
  if (model.svm.dictionary_size() != model.tree.point_count()) {
    throw Error("SVM and dictionary sizes disagree");
  }
  if (hardware_ && model.config.window_size > 0) scorer_.emplace(weights_, ScoreMode::kFixed);
  histogram_.counts.assign(model.tree.point_count(), 0);
  histogram_.window_size = model.config.window_size;
  for (std::size_t c = 0; c < model.detectors.size(); ++c) heat_.emplace_back(model.config.geometry);
}

const HeatMapState* Pipeline::heat_map(std::size_t class_index) const {
  return class_index < heat_.size() ? &heat_[class_index] : nullptr;
}

std::optional<WindowResult> Pipeline::push(const Event& e) {
  last_leaf_ = -1;
  if (!extractor_.push(e)) return std::nullopt;
  const std::int32_t leaf = matcher_.match(extractor_.descriptor());
  last_leaf_ = leaf;
  last_t_ = e.t;
  ++histogram_.counts[static_cast<std::size_t>(leaf)];
  ++filled_;
  if (scorer_) scorer_->push(leaf);
  for (std::size_t c = 0; c < heat_.size(); ++c) heat_[c].update(model_->detectors[c], e, leaf);
  if (model_->config.window_size > 0 && filled_ == model_->config.window_size) return close_window(e.t);
  return std::nullopt;
}

std::optional<WindowResult> Pipeline::finish() {
  if (model_->config.window_size == 0 && filled_ > 0) return close_window(last_t_);
  return std::nullopt;
}

WindowResult Pipeline::close_window(std::uint64_t t_end) {
  WindowResult r;
  r.index = window_index_++;
  r.t_end = t_end;
  r.events = filled_;
  if (scorer_) {
    r.classification = scorer_->current();
  } else if (hardware_) {
    const auto sums = window_scores_fixed(weights_, histogram_.counts);
    int best = 0;
    r.classification.scores.resize(sums.size());
    for (std::size_t c = 0; c < sums.size(); ++c) {
      r.classification.scores[c] = static_cast<double>(sums[c]) / weights_.fixed_scale;
      if (sums[c] > sums[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    r.classification.label = best;
  } else {
    r.classification = classify(model_->svm, histogram_);
  }
  const auto label = static_cast<std::size_t>(r.classification.label);
  if (label < heat_.size()) {
    r.position = heat_[label].detect();
    r.threshold = heat_[label].threshold();
    r.landmark_hits = heat_[label].hits();
  }
  if (observer_) observer_(r, *this);
  std::fill(histogram_.counts.begin(), histogram_.counts.end(), 0);
  filled_ = 0;
  for (auto& h : heat_) h.reset();
  return r;
}

std::vector<WindowResult> run_stream(const Model& model, const EventStream& stream) {
  Pipeline pipeline(model);
  std::vector<WindowResult> out;
  for (const auto& e : stream.events) {
    if (auto w = pipeline.push(e)) out.push_back(std::move(*w));
  }
  if (auto w = pipeline.finish()) out.push_back(std::move(*w));
  return out;
}

}  // namespace pcarect
