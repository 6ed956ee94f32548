#include "icr/incremental.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <random>
#include <string>

#include "icr/errors.hpp"

namespace icr {
namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::vector<Vector> update_stage_draws(const StageStatistics& stats, std::size_t samples, std::uint64_t seed,
                                       std::size_t stage) {
  return sample_perturbations(stats, samples, stage_seed(seed, stage, StreamPurpose::UpdateDraws));
}

StageRegressor update_stage(const CascadeModel& model, std::size_t stage, std::span<const AlignmentSample> new_samples,
                            std::uint64_t seed, const FeatureExtractor& extractor, StageUpdateTiming* timing) {
  if (stage >= model.stages.size()) throw InvalidArgument("stage index out of range");
  const StageRegressor& current = model.stages[stage];
  if (timing) *timing = {stage, new_samples.size(), 0.0, 0.0};
  if (new_samples.empty()) return current;

  const auto t0 = Clock::now();
  const auto draws = update_stage_draws(model.stats[stage], new_samples.size(), seed, stage);
  const StageDesign design = build_stage_design(new_samples, draws, extractor);
  const double feature_ms = millis_since(t0);

  const auto t1 = Clock::now();
  StageRegressor next{incremental_update(current.elm, design.features, design.targets), stage};
  if (timing) {
    timing->feature_millis = feature_ms;
    timing->regressor_millis = millis_since(t1);
  }
  return next;
}

std::pair<CascadeModel, UpdateReport> update_model(const CascadeModel& model,
                                                   std::span<const AlignmentSample> new_samples, std::uint64_t seed,
                                                   const FeatureExtractor& extractor) {
  if (model.stages.empty() || model.stages.size() != model.stats.size()) {
    throw InvalidArgument("update_model needs a trained model with statistics for every stage");
  }
  for (const auto& s : new_samples) {
    if (s.truth.landmarks() != model.landmarks()) {
      throw DimensionMismatch("sample '" + s.id + "' has " + std::to_string(s.truth.landmarks()) +
                              " landmarks, model has " + std::to_string(model.landmarks()));
    }
  }

  const auto start = Clock::now();
  const std::size_t stages = model.stages.size();
  std::vector<StageRegressor> updated(stages);
  UpdateReport report;
  report.stages.resize(stages);
  std::vector<std::exception_ptr> failures(stages);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t t = 0; t < stages; ++t) {
    try {
      updated[t] = update_stage(model, t, new_samples, seed, extractor, &report.stages[t]);
    } catch (...) {
      failures[t] = std::current_exception();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  // Assemble the new model only after every stage succeeded.
  CascadeModel next = model;
  next.stages = std::move(updated);
  report.wall_millis = millis_since(start);
  return {std::move(next), std::move(report)};
}

std::pair<CascadeModel, UpdateReport> update_model(const CascadeModel& model,
                                                   std::span<const AlignmentSample> new_samples, std::uint64_t seed) {
  return update_model(model, new_samples, seed, DescriptorExtractor(model.descriptor));
}

std::vector<std::vector<AlignmentSample>> partition_batches(std::span<const AlignmentSample> samples, std::size_t k,
                                                            std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("need at least one batch");
  if (k > samples.size()) {
    throw InvalidArgument("cannot split " + std::to_string(samples.size()) + " samples into " + std::to_string(k) +
                          " batches");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<AlignmentSample>> batches(k);
  const std::size_t base = samples.size() / k;
  const std::size_t extra = samples.size() % k;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t n = base + (b < extra ? 1 : 0);
    batches[b].reserve(n);
    for (std::size_t i = 0; i < n; ++i) batches[b].push_back(samples[order[pos++]]);
  }
  return batches;
}

}  // namespace icr
