#include "icr/cascade.hpp"

#include <algorithm>
#include <exception>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "icr/errors.hpp"

namespace icr {
namespace {

Matrix stack_rows(std::span<const Vector> rows, Eigen::Index width) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw DimensionMismatch("row length mismatch");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

void check_samples(std::span<const AlignmentSample> samples, std::size_t min_count) {
  if (samples.size() < min_count) {
    throw InvalidArgument("training needs at least " + std::to_string(min_count) + " samples");
  }
  const auto n = samples.front().truth.coords.size();
  if (n == 0) throw InvalidArgument("training samples need ground-truth shapes");
  for (const auto& s : samples) {
    if (s.truth.coords.size() != n) throw DimensionMismatch("samples differ in landmark count");
  }
}

}  // namespace

StageStatistics StageStatistics::from_moments(Vector mu, Matrix sigma) {
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) throw DimensionMismatch("covariance size mismatch");
  if (!mu.allFinite() || !sigma.allFinite()) throw InvalidArgument("non-finite stage statistics");
  StageStatistics st;
  st.mu = std::move(mu);
  st.sigma = std::move(sigma);
  Matrix jittered = st.sigma;
  jittered.diagonal().array() += st.jitter();
  Eigen::LLT<Matrix> llt(jittered);
  if (llt.info() != Eigen::Success) throw InvalidArgument("stage covariance is not positive semi-definite");
  st.chol = llt.matrixL();
  return st;
}

double StageStatistics::jitter() const {
  const double dim = static_cast<double>(std::max<Eigen::Index>(mu.size(), 1));
  return std::max(1e-8, 1e-6 * sigma.trace() / dim);
}

void TrainConfig::validate() const {
  if (stages < 1) throw InvalidArgument("stages must be >= 1");
  if (hidden_nodes < 1) throw InvalidArgument("hidden_nodes must be >= 1");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");
  if (perturbations < 1) throw InvalidArgument("perturbations must be >= 1");
}

void CascadeModel::validate() const {
  if (stages.size() != stats.size()) throw FormatError("stage and statistics counts differ");
  const Eigen::Index out = reference_shape.coords.size();
  if (out == 0 || out % 2 != 0) throw FormatError("reference shape must have an even, non-zero length");
  descriptor.validate();
  for (std::size_t t = 0; t < stages.size(); ++t) {
    const auto& elm = stages[t].elm;
    const auto k = elm.layer.nodes();
    const std::string where = "stage " + std::to_string(t) + ": ";
    if (elm.layer.biases.size() != k) throw FormatError(where + "bias count differs from node count");
    if (elm.layer.features() != stages.front().elm.layer.features()) {
      throw FormatError(where + "feature dimension differs between stages");
    }
    if (elm.beta.rows() != k || elm.beta.cols() != out) throw FormatError(where + "beta shape inconsistent");
    if (elm.kmat.rows() != k || elm.kmat.cols() != k) throw FormatError(where + "kmat shape inconsistent");
    if (elm.kmat != elm.kmat.transpose()) throw FormatError(where + "kmat is not symmetric");
    if (!elm.beta.allFinite() || !elm.kmat.allFinite() || !elm.layer.weights.allFinite() ||
        !elm.layer.biases.allFinite()) {
      throw FormatError(where + "non-finite parameters");
    }
    if (stats[t].mu.size() != out || stats[t].sigma.rows() != out || stats[t].sigma.cols() != out) {
      throw FormatError(where + "statistics shape inconsistent");
    }
    if (stats[t].sigma != stats[t].sigma.transpose()) throw FormatError(where + "covariance is not symmetric");
  }
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage, StreamPurpose purpose) {
  const std::uint64_t base = seed + static_cast<std::uint64_t>(stage);
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(purpose)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

std::vector<Shape> initial_shapes(const Shape& reference, std::span<const AlignmentSample> samples) {
  std::vector<Shape> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(place_in_bbox(reference, s.box));
  return out;
}

StageStatistics estimate_stage_statistics(std::span<const Vector> deltas) {
  if (deltas.size() < 2) throw InvalidArgument("stage statistics need at least 2 increments");
  const Eigen::Index dim = deltas.front().size();
  const Matrix rows = stack_rows(deltas, dim);
  Vector mu = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - mu.transpose();
  Matrix sigma = (centered.transpose() * centered) / static_cast<double>(deltas.size() - 1);
  sigma = (0.5 * (sigma + sigma.transpose())).eval();
  return StageStatistics::from_moments(std::move(mu), std::move(sigma));
}

std::vector<Vector> sample_perturbations(const StageStatistics& stats, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  Vector z(stats.mu.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = gauss(rng);
    out.push_back(stats.mu + stats.chol.triangularView<Eigen::Lower>() * z);
  }
  return out;
}

StageDesign build_stage_design(std::span<const AlignmentSample> samples, std::span<const Vector> draws,
                               const FeatureExtractor& extractor) {
  if (draws.empty()) return {};
  if (samples.empty() || draws.size() % samples.size() != 0) {
    throw DimensionMismatch("draw count must be a multiple of the sample count");
  }
  const std::size_t per_sample = draws.size() / samples.size();
  std::vector<AlignmentSample> rows_samples;
  std::vector<Shape> rows_shapes;
  rows_samples.reserve(draws.size());
  rows_shapes.reserve(draws.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < per_sample; ++p) {
      const Vector& d = draws[i * per_sample + p];
      if (d.size() != samples[i].truth.coords.size()) throw DimensionMismatch("draw length differs from shape");
      rows_samples.push_back(samples[i]);
      rows_shapes.emplace_back(samples[i].truth.coords + d);
    }
  }
  StageDesign design;
  design.features = extract_feature_matrix(rows_samples, rows_shapes, extractor);
  design.targets = stack_rows(draws, draws.front().size());
  return design;
}

std::vector<Vector> parallel_stage_draws(const StageStatistics& stats, std::size_t samples, const TrainConfig& cfg,
                                         std::size_t stage) {
  return sample_perturbations(stats, samples * cfg.perturbations,
                              stage_seed(cfg.seed, stage, StreamPurpose::TrainDraws));
}

CascadeModel train_sequential(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                              const FeatureExtractor& extractor, SequentialTrace* trace) {
  cfg.validate();
  check_samples(samples, 2);
  const std::vector<Shape> truths = [&] {
    std::vector<Shape> t;
    for (const auto& s : samples) t.push_back(s.truth);
    return t;
  }();

  CascadeModel model;
  model.reference_shape = mean_shape(truths);
  if (const auto* d = dynamic_cast<const DescriptorExtractor*>(&extractor)) model.descriptor = d->config();

  std::vector<Shape> current = initial_shapes(model.reference_shape, samples);
  if (trace) trace->shapes = {current};
  const Eigen::Index features = extractor.dimension(model.landmarks());

  for (std::size_t t = 0; t < cfg.stages; ++t) {
    const Matrix x = extract_feature_matrix(samples, current, extractor);
    std::vector<Vector> deltas;
    deltas.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) deltas.push_back(current[i].coords - truths[i].coords);
    const Matrix y = stack_rows(deltas, model.reference_shape.coords.size());

    const HiddenLayer layer =
        init_hidden_layer(features, cfg.hidden_nodes, stage_seed(cfg.seed, t, StreamPurpose::HiddenLayer));
    const Matrix h = hidden_matrix(layer, x);
    StageRegressor stage{batch_train_hidden(layer, h, y, cfg.ridge), t};
    model.stats.push_back(estimate_stage_statistics(deltas));

    const Matrix step = h * stage.elm.beta;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      current[i].coords -= step.row(static_cast<Eigen::Index>(i)).transpose();
    }
    model.stages.push_back(std::move(stage));
    if (trace) trace->shapes.push_back(current);
  }
  return model;
}

CascadeModel train_sequential(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                              const DescriptorConfig& descriptor, SequentialTrace* trace) {
  return train_sequential(samples, cfg, DescriptorExtractor(descriptor), trace);
}

StageRegressor train_parallel_stage(std::span<const AlignmentSample> samples, const StageStatistics& stats,
                                    const TrainConfig& cfg, std::size_t stage, const FeatureExtractor& extractor) {
  const auto draws = parallel_stage_draws(stats, samples.size(), cfg, stage);
  const StageDesign design = build_stage_design(samples, draws, extractor);
  const HiddenLayer layer = init_hidden_layer(design.features.cols(), cfg.hidden_nodes,
                                              stage_seed(cfg.seed, stage, StreamPurpose::HiddenLayer));
  return {batch_train(layer, design.features, design.targets, cfg.ridge), stage};
}

CascadeModel train_parallel(std::span<const AlignmentSample> samples, std::span<const StageStatistics> stats,
                            const TrainConfig& cfg, const FeatureExtractor& extractor) {
  cfg.validate();
  check_samples(samples, 1);
  if (stats.size() != cfg.stages) {
    throw InvalidArgument("got " + std::to_string(stats.size()) + " stage statistics for " +
                          std::to_string(cfg.stages) + " stages");
  }
  CascadeModel model;
  {
    std::vector<Shape> truths;
    for (const auto& s : samples) truths.push_back(s.truth);
    model.reference_shape = mean_shape(truths);
  }
  if (const auto* d = dynamic_cast<const DescriptorExtractor*>(&extractor)) model.descriptor = d->config();
  for (const auto& st : stats) {
    if (st.mu.size() != model.reference_shape.coords.size()) throw DimensionMismatch("statistics/shape mismatch");
  }
  model.stats.assign(stats.begin(), stats.end());
  model.stages.resize(cfg.stages);

  std::vector<std::exception_ptr> failures(cfg.stages);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t t = 0; t < cfg.stages; ++t) {
    try {
      model.stages[t] = train_parallel_stage(samples, stats[t], cfg, t, extractor);
    } catch (...) {
      failures[t] = std::current_exception();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return model;
}

CascadeModel train_parallel(std::span<const AlignmentSample> samples, std::span<const StageStatistics> stats,
                            const TrainConfig& cfg, const DescriptorConfig& descriptor) {
  return train_parallel(samples, stats, cfg, DescriptorExtractor(descriptor));
}

Shape apply_cascade(const CascadeModel& model, const AlignmentSample& sample, const FeatureExtractor& extractor,
                    std::vector<Shape>* trace) {
  Shape s = place_in_bbox(model.reference_shape, sample.box);
  if (trace) trace->assign(1, s);
  for (const auto& stage : model.stages) {
    const Vector x = extractor.extract(sample, s);
    const Matrix step = predict(stage.elm, x.transpose());
    s.coords -= step.row(0).transpose();
    if (trace) trace->push_back(s);
  }
  return s;
}

Shape apply_cascade(const CascadeModel& model, const GrayImage& img, const BoundingBox& box) {
  AlignmentSample sample;
  sample.image = std::shared_ptr<const GrayImage>(&img, [](const GrayImage*) {});
  sample.box = box;
  return apply_cascade(model, sample, DescriptorExtractor(model.descriptor));
}

std::vector<std::vector<Shape>> apply_cascade_all(const CascadeModel& model, std::span<const AlignmentSample> samples,
                                                  const FeatureExtractor& extractor) {
  std::vector<std::vector<Shape>> out;
  out.push_back(initial_shapes(model.reference_shape, samples));
  if (samples.empty()) return out;
  for (const auto& stage : model.stages) {
    std::vector<Shape> next = out.back();
    const Matrix step = predict(stage.elm, extract_feature_matrix(samples, next, extractor));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      next[i].coords -= step.row(static_cast<Eigen::Index>(i)).transpose();
    }
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace icr
