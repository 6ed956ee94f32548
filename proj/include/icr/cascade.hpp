#pragma once

// Cascade of ELM stage regressors.
//
// Stage t maps features at the current estimate s^{t-1} to the overshoot
// ds = s^{t-1} - s*, and refinement subtracts it: s^t = s^{t-1} - G^t(f(I, s^{t-1})).
//
// Sequential training (train_sequential) propagates the training shapes through
// each fitted stage. Parallel training (train_parallel) instead samples every
// stage's overshoots from a Gaussian fitted to the sequential pass, which makes
// the stages independent of each other.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "icr/elm.hpp"
#include "icr/features.hpp"
#include "icr/sample.hpp"
#include "icr/shape.hpp"

namespace icr {

struct StageRegressor {
  ElmModel elm;
  std::size_t stage_index = 0;
};

struct StageStatistics {
  Vector mu;     // 2L
  Matrix sigma;  // 2L x 2L
  Matrix chol;   // lower factor of sigma + jitter * I

  /// Recomputes chol from sigma with jitter max(1e-8, 1e-6 * trace / 2L).
  static StageStatistics from_moments(Vector mu, Matrix sigma);
  double jitter() const;
};

struct TrainConfig {
  std::size_t stages = 4;
  Eigen::Index hidden_nodes = 500;
  double ridge = kDefaultRidge;
  std::uint64_t seed = 0;
  std::size_t perturbations = 1;

  void validate() const;
};

struct CascadeModel {
  std::vector<StageRegressor> stages;
  std::vector<StageStatistics> stats;
  Shape reference_shape;
  DescriptorConfig descriptor;

  std::size_t landmarks() const { return reference_shape.landmarks(); }
  void validate() const;
};

/// s^t for every training sample and stage, t = 0..T.
struct SequentialTrace {
  std::vector<std::vector<Shape>> shapes;
};

/// Random streams are derived from (seed, stage, purpose) so each stage owns
/// independent draws.
enum class StreamPurpose : std::uint64_t { HiddenLayer = 1, TrainDraws = 2, UpdateDraws = 3 };
std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage, StreamPurpose purpose);

/// s^0 for each sample: reference shape placed in the sample's face box.
std::vector<Shape> initial_shapes(const Shape& reference, std::span<const AlignmentSample> samples);

CascadeModel train_sequential(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                              const FeatureExtractor& extractor, SequentialTrace* trace = nullptr);
CascadeModel train_sequential(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                              const DescriptorConfig& descriptor = {}, SequentialTrace* trace = nullptr);

/// Sample mean and unbiased covariance of the given increments.
StageStatistics estimate_stage_statistics(std::span<const Vector> deltas);

/// mu + chol * z with z standard normal, deterministic in seed.
std::vector<Vector> sample_perturbations(const StageStatistics& stats, std::size_t count, std::uint64_t seed);

/// Design rows of a Monte-Carlo stage: features at s* + ds (one row per
/// (sample, draw)) with targets ds. draws[i * per_sample + p] belongs to sample i.
struct StageDesign {
  Matrix features;
  Matrix targets;
};
StageDesign build_stage_design(std::span<const AlignmentSample> samples, std::span<const Vector> draws,
                               const FeatureExtractor& extractor);

/// Draws for one stage of parallel training: perturbations per sample, sample-major.
std::vector<Vector> parallel_stage_draws(const StageStatistics& stats, std::size_t samples, const TrainConfig& cfg,
                                         std::size_t stage);

/// Trains one stage of the parallel cascade. Depends only on its inputs, so
/// stages may be trained in any order or concurrently.
StageRegressor train_parallel_stage(std::span<const AlignmentSample> samples, const StageStatistics& stats,
                                    const TrainConfig& cfg, std::size_t stage, const FeatureExtractor& extractor);

CascadeModel train_parallel(std::span<const AlignmentSample> samples, std::span<const StageStatistics> stats,
                            const TrainConfig& cfg, const FeatureExtractor& extractor);
CascadeModel train_parallel(std::span<const AlignmentSample> samples, std::span<const StageStatistics> stats,
                            const TrainConfig& cfg, const DescriptorConfig& descriptor = {});

/// Runs the cascade from place_in_bbox(reference, sample.box).
/// When `trace` is given it receives s^0..s^T.
Shape apply_cascade(const CascadeModel& model, const AlignmentSample& sample, const FeatureExtractor& extractor,
                    std::vector<Shape>* trace = nullptr);
Shape apply_cascade(const CascadeModel& model, const GrayImage& img, const BoundingBox& box);

/// Inference over many samples (concurrent across samples). Row t of the
/// result holds s^t for every sample.
std::vector<std::vector<Shape>> apply_cascade_all(const CascadeModel& model, std::span<const AlignmentSample> samples,
                                                  const FeatureExtractor& extractor);

}  // namespace icr
