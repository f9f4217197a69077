#include "fixtures.hpp"

namespace pcarect::testing {

SceneSpec small_scene(Shape shape, std::uint64_t duration_us) {
  SceneSpec s;
  s.shape = shape;
  s.size = 18;
  s.x0 = 70;
  s.y0 = 60;
  s.vx = 60;
  s.vy = 30;
  s.duration_us = duration_us;
  s.event_rate = 60'000;
  s.noise_rate = 1500;
  return s;
}

std::vector<LabeledStream> small_dataset(std::uint64_t seed, std::uint64_t duration_us) {
  std::vector<LabeledStream> data;
  std::uint64_t k = 0;
  for (Shape shape : {Shape::kBar, Shape::kCross, Shape::kRing}) {
    auto scene = synth_scene(small_scene(shape, duration_us), seed * 31 + k++);
    data.push_back({std::string(to_string(shape)), std::move(scene.stream), std::move(scene.track),
                    std::string(to_string(shape)) + ".csv"});
  }
  return data;
}

PipelineConfig small_config(Reduction reduction, bool normalize) {
  PipelineConfig c;
  c.reduction = reduction;
  c.rect.normalize = normalize;
  c.dictionary_size = 24;
  c.window_size = 1000;
  c.sample_cap = 4000;
  c.kmeans_iterations = 30;
  c.svm_epochs = 50;
  c.landmarks = 5;
  return c;
}

Model small_model(Reduction reduction, bool normalize, std::uint64_t seed) {
  auto c = small_config(reduction, normalize);
  c.seed = seed;
  const auto data = small_dataset(seed);
  return train_model(c, data, nullptr, nullptr, 1);
}

}  // namespace pcarect::testing
