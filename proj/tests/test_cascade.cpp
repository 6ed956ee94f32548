#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>
#include <omp.h>

#include "icr/cascade.hpp"
#include "icr/dataset.hpp"
#include "icr/errors.hpp"
#include "icr/experiment.hpp"
#include "icr/model_io.hpp"

using namespace icr;

namespace {

// Features are a fixed linear map of the current overshoot; bypasses images.
class OvershootExtractor final : public FeatureExtractor {
 public:
  Eigen::Index dimension(std::size_t landmarks) const override { return static_cast<Eigen::Index>(2 * landmarks); }
  Eigen::VectorXd extract(const AlignmentSample& sample, const Shape& current) const override {
    return (current.coords - sample.truth.coords) / 20.0;
  }
};

std::vector<Vector> random_vectors(std::size_t n, Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v(j) = g(rng) * (1.0 + j) + 0.5 * j;
    out.push_back(v);
  }
  return out;
}

const Dataset& small_train() {
  static const Dataset d = generate_synthetic(200, 10, 0.02, 101);
  return d;
}
const Dataset& small_test() {
  static const Dataset d = generate_synthetic(100, 10, 0.02, 202);
  return d;
}

TrainConfig small_config(std::size_t stages) {
  TrainConfig cfg;
  cfg.stages = stages;
  cfg.hidden_nodes = 200;
  cfg.ridge = 1.0;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("estimate_stage_statistics") {
  SUBCASE("symmetric pair has zero mean") {
    const Vector v = Vector::LinSpaced(6, -1.0, 4.0);
    const std::vector<Vector> d{v, -v};
    CHECK(estimate_stage_statistics(d).mu.isZero(0.0));
  }
  SUBCASE("identical increments: zero covariance, jittered factor still exists") {
    const std::vector<Vector> d(5, Vector::Constant(4, 2.5));
    const auto st = estimate_stage_statistics(d);
    CHECK(st.sigma.isZero(0.0));
    CHECK(st.jitter() == 1e-8);
    CHECK(st.chol.allFinite());
  }
  SUBCASE("matches a naive two-pass oracle") {
    const auto d = random_vectors(100, 6, 3);
    const auto st = estimate_stage_statistics(d);
    Vector mean = Vector::Zero(6);
    for (const auto& v : d) mean += v;
    mean /= 100.0;
    Matrix cov = Matrix::Zero(6, 6);
    for (const auto& v : d) {
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) cov(i, j) += (v(i) - mean(i)) * (v(j) - mean(j));
      }
    }
    cov /= 99.0;
    CHECK((st.mu - mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((st.sigma - cov).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(st.sigma == st.sigma.transpose());
    Matrix jittered = st.sigma;
    jittered.diagonal().array() += st.jitter();
    CHECK((st.chol * st.chol.transpose() - jittered).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("too few increments") {
    const std::vector<Vector> one{Vector::Zero(4)};
    CHECK_THROWS_AS(estimate_stage_statistics(one), InvalidArgument);
  }
}

TEST_CASE("sample_perturbations") {
  SUBCASE("empty draw") {
    const auto st = StageStatistics::from_moments(Vector::Zero(4), Matrix::Identity(4, 4));
    CHECK(sample_perturbations(st, 0, 1).empty());
  }
  SUBCASE("degenerate covariance stays at the mean") {
    const Vector mu = Vector::LinSpaced(4, 1.0, 4.0);
    const auto st = StageStatistics::from_moments(mu, Matrix::Zero(4, 4));
    const double bound = 6.0 * std::sqrt(st.jitter());
    for (const auto& s : sample_perturbations(st, 200, 3)) CHECK((s - mu).cwiseAbs().maxCoeff() <= bound);
  }
  SUBCASE("standard normal moments") {
    const auto st = StageStatistics::from_moments(Vector::Zero(3), Matrix::Identity(3, 3));
    const auto draws = sample_perturbations(st, 10000, 17);
    REQUIRE(draws.size() == 10000);
    Vector mean = Vector::Zero(3);
    for (const auto& d : draws) mean += d;
    mean /= 10000.0;
    Vector var = Vector::Zero(3);
    for (const auto& d : draws) var += (d - mean).cwiseAbs2();
    var /= 9999.0;
    CHECK(mean.cwiseAbs().maxCoeff() <= 0.05);
    CHECK((var.array() - 1.0).abs().maxCoeff() <= 0.1);
  }
  SUBCASE("deterministic in seed") {
    const auto st = StageStatistics::from_moments(Vector::Zero(2), Matrix::Identity(2, 2));
    const auto a = sample_perturbations(st, 5, 9), b = sample_perturbations(st, 5, 9);
    const auto c = sample_perturbations(st, 5, 10);
    for (int i = 0; i < 5; ++i) CHECK(a[i] == b[i]);
    CHECK(a[0] != c[0]);
  }
  SUBCASE("statistics round trip") {
    const auto source = estimate_stage_statistics(random_vectors(50, 4, 8));
    const auto draws = sample_perturbations(source, 50000, 23);
    const auto back = estimate_stage_statistics(draws);
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double sd = std::sqrt(source.sigma(j, j) + source.jitter());
      CHECK(std::abs(back.mu(j) - source.mu(j)) <= 3.0 * sd / std::sqrt(50000.0));
    }
  }
}

TEST_CASE("train_sequential with exact-interpolation features reaches zero training error") {
  const Dataset data = generate_synthetic(20, 4, 0.0, 31);
  TrainConfig cfg;
  cfg.stages = 1;
  cfg.hidden_nodes = 20;  // square design: N = K
  cfg.ridge = 0.0;
  cfg.seed = 3;
  SequentialTrace trace;
  const auto model = train_sequential(data.samples, cfg, OvershootExtractor(), &trace);
  const auto nme = stage_mean_nme(trace.shapes, data.samples, EvalConfig::synthetic(4));
  CHECK(nme[0] > 0.01);
  CHECK(nme[1] <= 1e-6);
}

TEST_CASE("train_sequential with samples already at ground truth learns zero increments") {
  Dataset data = generate_synthetic(6, 5, 0.0, 4);
  const Shape fixed = data.samples[0].truth;
  for (auto& s : data.samples) {
    s.truth = fixed;
    s.box = tight_bbox(fixed);
  }
  TrainConfig cfg = small_config(1);
  cfg.hidden_nodes = 8;
  const auto model = train_sequential(data.samples, cfg, DescriptorConfig{});
  CHECK(model.stats[0].mu.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(model.stats[0].sigma.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(model.stages[0].elm.beta.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("train_sequential model shape for 29-landmark data with 500 hidden nodes") {
  const Dataset data = generate_synthetic(30, 29, 0.02, 6);
  TrainConfig cfg;
  cfg.stages = 4;
  cfg.hidden_nodes = 500;
  const auto model = train_sequential(data.samples, cfg, DescriptorConfig{});
  REQUIRE(model.stages.size() == 4);
  REQUIRE(model.stats.size() == 4);
  for (const auto& st : model.stages) {
    CHECK(st.elm.beta.rows() == 500);
    CHECK(st.elm.beta.cols() == 58);
    CHECK(st.elm.layer.features() == 29 * 128);
  }
  CHECK_NOTHROW(model.validate());
}

TEST_CASE("train_sequential rejects bad input") {
  const Dataset data = generate_synthetic(3, 4, 0.0, 1);
  CHECK_THROWS_AS(train_sequential(std::span(data.samples).first(1), small_config(1)), InvalidArgument);
  TrainConfig bad = small_config(1);
  bad.stages = 0;
  CHECK_THROWS_AS(train_sequential(data.samples, bad), InvalidArgument);
}

TEST_CASE("sequential training refines the training shapes stage by stage") {
  SequentialTrace trace;
  train_sequential(small_train().samples, small_config(4), DescriptorConfig{}, &trace);
  const auto nme = stage_mean_nme(trace.shapes, small_train().samples, EvalConfig::synthetic(10));
  int increases = 0;
  for (std::size_t t = 1; t < nme.size(); ++t) {
    if (nme[t] > nme[t - 1]) {
      ++increases;
      CHECK(nme[t] <= 1.01 * nme[t - 1]);
    }
  }
  CHECK(increases <= 1);
}

TEST_CASE("two-stage cascade halves the test error of the initialization") {
  const DescriptorExtractor ex;
  const auto model = train_sequential(small_train().samples, small_config(2), ex);
  const auto nme = stage_mean_nme(apply_cascade_all(model, small_test().samples, ex), small_test().samples,
                                  EvalConfig::synthetic(10));
  MESSAGE("test NME by stage: " << nme[0] << " " << nme[1] << " " << nme[2]);
  CHECK(nme[1] < nme[0]);
  CHECK(nme[2] < nme[1]);
  CHECK(nme[2] <= 0.5 * nme[0]);
}

TEST_CASE("train_parallel") {
  const DescriptorExtractor ex;
  const auto& train = small_train();
  const TrainConfig cfg = small_config(3);
  const auto stats = train_sequential(train.samples, cfg, ex).stats;

  SUBCASE("stage execution order does not matter") {
    const auto model = train_parallel(train.samples, stats, cfg, ex);
    CascadeModel reversed = model;
    for (std::size_t t = cfg.stages; t-- > 0;) {
      reversed.stages[t] = train_parallel_stage(train.samples, stats[t], cfg, t, ex);
    }
    CHECK(models_identical(model, reversed));
  }
  SUBCASE("worker count does not matter") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = train_parallel(train.samples, stats, cfg, ex);
    omp_set_num_threads(4);
    const auto four = train_parallel(train.samples, stats, cfg, ex);
    omp_set_num_threads(saved);
    CHECK(models_identical(one, four));
  }
  SUBCASE("rows per stage equal samples times perturbations") {
    TrainConfig p3 = cfg;
    p3.perturbations = 3;
    const auto one = train_parallel(std::span(train.samples).first(40), stats, cfg, ex);
    const auto three = train_parallel(std::span(train.samples).first(40), stats, p3, ex);
    for (std::size_t t = 0; t < cfg.stages; ++t) {
      CHECK(one.stages[t].elm.samples_seen == 40);
      CHECK(three.stages[t].elm.samples_seen == 120);
    }
  }
  SUBCASE("statistics count must match the stage count") {
    TrainConfig four = cfg;
    four.stages = 4;
    CHECK_THROWS_AS(train_parallel(train.samples, stats, four, ex), InvalidArgument);
  }
  SUBCASE("first parallel stage generalizes like the sequential first stage") {
    TrainConfig one = cfg;
    one.stages = 1;
    const auto seq = train_sequential(train.samples, one, ex);
    const auto par = train_parallel(train.samples, std::span(seq.stats).first(1), one, ex);
    const auto cfg_eval = EvalConfig::synthetic(10);
    const double s = evaluate_model(seq, small_test().samples, cfg_eval, ex).mean_nme();
    const double p = evaluate_model(par, small_test().samples, cfg_eval, ex).mean_nme();
    MESSAGE("stage-1 test NME sequential " << s << " parallel " << p);
    CHECK(std::abs(p - s) / s <= 0.10);
  }
}

TEST_CASE("apply_cascade") {
  const Dataset data = generate_synthetic(4, 5, 0.0, 77);
  const DescriptorExtractor ex;
  CascadeModel model = train_sequential(data.samples, small_config(2), ex);
  const auto& sample = data.samples[2];
  const Shape s0 = place_in_bbox(model.reference_shape, sample.box);

  SUBCASE("empty cascade returns the initialization") {
    CascadeModel empty = model;
    empty.stages.clear();
    empty.stats.clear();
    CHECK(apply_cascade(empty, sample, ex) == s0);
  }
  SUBCASE("zero regressors return the initialization") {
    for (auto& st : model.stages) st.elm.beta.setZero();
    CHECK(apply_cascade(model, sample, ex) == s0);
  }
  SUBCASE("image/box overload matches the sample overload") {
    const Shape a = apply_cascade(model, sample, ex);
    const Shape b = apply_cascade(model, *sample.image, sample.box);
    CHECK((a.coords - b.coords).cwiseAbs().maxCoeff() <= 1e-9);
    std::vector<Shape> trace;
    apply_cascade(model, sample, ex, &trace);
    CHECK(trace.size() == 3);
    CHECK(trace.front() == s0);
  }
}
