#include "icr/experiment.hpp"

#include <charconv>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include "icr/errors.hpp"

namespace icr {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double Evaluation::mean_nme() const {
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& e : errors) sum += e.nme;
  return sum / static_cast<double>(errors.size());
}

Evaluation evaluate_shapes(std::span<const AlignmentSample> samples, std::span<const Shape> predictions,
                           const EvalConfig& cfg) {
  if (samples.size() != predictions.size()) throw DimensionMismatch("one prediction per sample required");
  Evaluation eval;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      eval.errors.push_back({samples[i].id, normalized_mean_error(predictions[i], samples[i].truth, cfg)});
    } catch (const InvalidArgument&) {
      eval.excluded.push_back(samples[i].id);
    }
  }
  if (!eval.errors.empty()) {
    std::vector<double> values;
    for (const auto& e : eval.errors) values.push_back(e.nme);
    const auto thresholds = default_ced_thresholds();
    eval.ced = ced_curve(values, thresholds);
  }
  return eval;
}

Evaluation evaluate_model(const CascadeModel& model, std::span<const AlignmentSample> samples, const EvalConfig& cfg,
                          const FeatureExtractor& extractor) {
  const auto shapes = apply_cascade_all(model, samples, extractor);
  return evaluate_shapes(samples, shapes.back(), cfg);
}

std::vector<double> stage_mean_nme(const std::vector<std::vector<Shape>>& stage_shapes,
                                   std::span<const AlignmentSample> samples, const EvalConfig& cfg) {
  std::vector<double> out;
  for (const auto& shapes : stage_shapes) out.push_back(evaluate_shapes(samples, shapes, cfg).mean_nme());
  return out;
}

CascadeModel train_parallel_with_statistics(std::span<const AlignmentSample> samples, const TrainConfig& cfg,
                                            const FeatureExtractor& extractor) {
  const CascadeModel sequential = train_sequential(samples, cfg, extractor);
  return train_parallel(samples, sequential.stats, cfg, extractor);
}

std::vector<IncrementalStep> run_incremental_experiment(const Dataset& train, const Dataset& test,
                                                        const IncrementalExperimentConfig& cfg,
                                                        const FeatureExtractor& extractor) {
  if (cfg.batches < 1) throw InvalidArgument("need at least one batch");
  const auto batches = partition_batches(train.samples, cfg.batches, cfg.train.seed);
  const EvalConfig eval_cfg = EvalConfig::parse(test.eval_preset, test.landmark_count);

  std::vector<IncrementalStep> steps;
  CascadeModel model = train_parallel_with_statistics(batches.front(), cfg.train, extractor);
  std::size_t seen = batches.front().size();
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    IncrementalStep step;
    if (b > 0) {
      // distinct draw stream per update call
      const std::uint64_t update_seed = cfg.train.seed + 1000003ULL * b;
      auto [next, report] = update_model(model, batches[b], update_seed, extractor);
      model = std::move(next);
      step.update_millis = report.wall_millis;
      seen += batches[b].size();
    }
    step.batch_pct = static_cast<int>((100 * (b + 1)) / cfg.batches);
    step.training_samples = seen;
    step.evaluation = evaluate_model(model, test.samples, eval_cfg, extractor);
    step.mean_nme = step.evaluation.mean_nme();
    steps.push_back(std::move(step));
  }
  return steps;
}

Dataset SyntheticBenchmark::train() const { return generate_synthetic(train_samples, landmarks, noise_level, seed); }

Dataset SyntheticBenchmark::test() const {
  return generate_synthetic(test_samples, landmarks, noise_level, seed + 0x9e3779b9ULL);
}

std::string errors_csv(const Evaluation& eval) {
  std::ostringstream out;
  out << "id,nme\n";
  for (const auto& e : eval.errors) out << e.id << ',' << fmt(e.nme) << '\n';
  return out.str();
}

std::string ced_csv(const std::vector<CedPoint>& ced) {
  std::ostringstream out;
  out << "threshold,fraction\n";
  for (const auto& p : ced) out << fmt(p.threshold) << ',' << fmt(p.fraction) << '\n';
  return out.str();
}

std::string update_report_csv(const UpdateReport& report) {
  std::ostringstream out;
  out << "stage,rows,millis,feature_millis,regressor_millis\n";
  for (const auto& s : report.stages) {
    out << s.stage << ',' << s.rows << ',' << fmt(s.millis()) << ',' << fmt(s.feature_millis) << ','
        << fmt(s.regressor_millis) << '\n';
  }
  return out.str();
}

std::string incremental_summary_csv(const std::vector<IncrementalStep>& steps) {
  std::ostringstream out;
  out << "batch_pct,mean_nme,update_millis\n";
  for (const auto& s : steps) out << s.batch_pct << ',' << fmt(s.mean_nme) << ',' << fmt(s.update_millis) << '\n';
  return out.str();
}

}  // namespace icr
