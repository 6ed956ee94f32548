#pragma once

// Evaluation and experiment drivers shared by the CLI and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "icr/cascade.hpp"
#include "icr/dataset.hpp"
#include "icr/incremental.hpp"

namespace icr {

struct SampleError {
  std::string id;
  double nme = 0.0;
};

struct Evaluation {
  std::vector<SampleError> errors;     // samples with a usable inter-pupil distance
  std::vector<std::string> excluded;   // zero inter-pupil distance
  std::vector<CedPoint> ced;

  double mean_nme() const;
};

Evaluation evaluate_shapes(std::span<const AlignmentSample> samples, std::span<const Shape> predictions,
                           const EvalConfig& cfg);
Evaluation evaluate_model(const CascadeModel& model, std::span<const AlignmentSample> samples, const EvalConfig& cfg,
                          const FeatureExtractor& extractor);

/// Mean NME of s^t for every stage t = 0..T (index 0 is the initialization).
std::vector<double> stage_mean_nme(const std::vector<std::vector<Shape>>& stage_shapes,
                                   std::span<const AlignmentSample> samples, const EvalConfig& cfg);

/// Sequential pass for statistics followed by parallel (Monte-Carlo) training.
CascadeModel train_parallel_with_statistics(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                                            const FeatureExtractor& extractor);

struct IncrementalStep {
  int batch_pct = 0;
  std::size_t training_samples = 0;
  double mean_nme = 0.0;
  double update_millis = 0.0;
  Evaluation evaluation;
};

struct IncrementalExperimentConfig {
  std::size_t batches = 6;
  TrainConfig train;
};

/// Trains on batch 1, then folds in the remaining batches one at a time,
/// evaluating on `test` after each step.
std::vector<IncrementalStep> run_incremental_experiment(const Dataset& train, const Dataset& test,
                                                        const IncrementalExperimentConfig& cfg,
                                                        const FeatureExtractor& extractor);

/// Deterministic desk-scale benchmark used by tests and `icr synth`.
struct SyntheticBenchmark {
  std::size_t train_samples = 400;
  std::size_t test_samples = 100;
  std::size_t landmarks = 10;
  double noise_level = 0.02;
  std::uint64_t seed = 2024;

  Dataset train() const;
  Dataset test() const;
};

// CSV emission
std::string errors_csv(const Evaluation& eval);
std::string ced_csv(const std::vector<CedPoint>& ced);
std::string update_report_csv(const UpdateReport& report);
std::string incremental_summary_csv(const std::vector<IncrementalStep>& steps);

}  // namespace icr
