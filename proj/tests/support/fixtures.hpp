#pragma once

// Small synthetic data sets and models shared by the pipeline-level tests.

#include <cstdint>
#include <vector>

#include "pcarect/synth.hpp"
#include "pcarect/training.hpp"

namespace pcarect::testing {

// One moving-shape scene per class (bar, cross, ring) with light noise.
SceneSpec small_scene(Shape shape, std::uint64_t duration_us);
std::vector<LabeledStream> small_dataset(std::uint64_t seed, std::uint64_t duration_us = 300'000);

// Fast settings: K = 24, S = 1000, capped sampling.
PipelineConfig small_config(Reduction reduction = Reduction::kVpca, bool normalize = true);

Model small_model(Reduction reduction = Reduction::kVpca, bool normalize = true, std::uint64_t seed = 1);

}  // namespace pcarect::testing
