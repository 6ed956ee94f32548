#pragma once

// Incremental update of a trained cascade with a new batch of samples.
//
// Every stage independently draws one overshoot per new image from its frozen
// statistics, extracts features at s* + ds and folds the rows into its ELM.
// Hidden parameters and statistics are left untouched.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "icr/cascade.hpp"

namespace icr {

struct StageUpdateTiming {
  std::size_t stage = 0;
  std::size_t rows = 0;
  double feature_millis = 0.0;
  double regressor_millis = 0.0;

  double millis() const { return feature_millis + regressor_millis; }
};

struct UpdateReport {
  std::vector<StageUpdateTiming> stages;
  double wall_millis = 0.0;

  std::size_t rows() const { return stages.empty() ? 0 : stages.front().rows; }
};

/// One overshoot per sample for `stage`, seeded by (seed, stage).
std::vector<Vector> update_stage_draws(const StageStatistics& stats, std::size_t samples, std::uint64_t seed,
                                       std::size_t stage);

/// Updates a single stage; all other stages are untouched.
StageRegressor update_stage(const CascadeModel& model, std::size_t stage, std::span<const AlignmentSample> new_samples,
                            std::uint64_t seed, const FeatureExtractor& extractor,
                            StageUpdateTiming* timing = nullptr);

std::pair<CascadeModel, UpdateReport> update_model(const CascadeModel& model,
                                                   std::span<const AlignmentSample> new_samples, std::uint64_t seed,
                                                   const FeatureExtractor& extractor);
std::pair<CascadeModel, UpdateReport> update_model(const CascadeModel& model,
                                                   std::span<const AlignmentSample> new_samples, std::uint64_t seed);

/// Seeded permutation split into k parts whose sizes differ by at most one
/// (the first N mod k parts get the extra sample).
std::vector<std::vector<AlignmentSample>> partition_batches(std::span<const AlignmentSample> samples, std::size_t k,
                                                            std::uint64_t seed);

}  // namespace icr
