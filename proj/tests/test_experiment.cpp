#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "icr/dataset.hpp"
#include "icr/experiment.hpp"

using namespace icr;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("evaluate_shapes excludes samples without an inter-pupil distance") {
  Dataset data = generate_synthetic(4, 6, 0.0, 3);
  std::vector<Shape> predictions;
  for (const auto& s : data.samples) predictions.push_back(s.truth);
  predictions[0].row(1) += 2.0;
  // collapse the eyes of sample 2 onto each other
  data.samples[2].truth.row(3) = data.samples[2].truth.row(0);
  data.samples[2].truth.col(3) = data.samples[2].truth.col(0);

  const Evaluation ev = evaluate_shapes(data.samples, predictions, EvalConfig::synthetic(6));
  REQUIRE(ev.errors.size() == 3);
  REQUIRE(ev.excluded.size() == 1);
  CHECK(ev.excluded[0] == data.samples[2].id);
  CHECK(ev.errors[0].nme > 0.0);
  CHECK(ev.errors[1].nme == 0.0);
  CHECK(ev.mean_nme() == doctest::Approx(ev.errors[0].nme / 3.0).epsilon(1e-14));
  REQUIRE(ev.ced.size() == 31);
  CHECK(ev.ced.back().fraction == 1.0);
}

TEST_CASE("CSV emitters") {
  Evaluation ev;
  ev.errors = {{"a", 0.5}, {"b", 0.125}};
  const auto e = lines(errors_csv(ev));
  REQUIRE(e.size() == 3);
  CHECK(e[0] == "id,nme");
  CHECK(e[1] == "a,0.5");
  CHECK(e[2] == "b,0.125");

  const auto c = lines(ced_csv({{0.0, 0.0}, {0.005, 0.25}}));
  REQUIRE(c.size() == 3);
  CHECK(c[0] == "threshold,fraction");
  CHECK(c[2] == "0.005,0.25");

  UpdateReport r;
  r.stages = {{0, 10, 1.5, 2.0}, {1, 10, 0.5, 0.25}};
  const auto u = lines(update_report_csv(r));
  REQUIRE(u.size() == 3);
  CHECK(u[0] == "stage,rows,millis,feature_millis,regressor_millis");
  CHECK(u[1] == "0,10,3.5,1.5,2");
  CHECK(u[2] == "1,10,0.75,0.5,0.25");

  IncrementalStep step;
  step.batch_pct = 16;
  step.mean_nme = 0.0625;
  step.update_millis = 0.0;
  const auto s = lines(incremental_summary_csv({step}));
  REQUIRE(s.size() == 2);
  CHECK(s[0] == "batch_pct,mean_nme,update_millis");
  CHECK(s[1] == "16,0.0625,0");
}

TEST_CASE("incremental experiment on a small split") {
  const Dataset train = generate_synthetic(60, 6, 0.02, 41);
  const Dataset test = generate_synthetic(20, 6, 0.02, 42);
  IncrementalExperimentConfig cfg;
  cfg.batches = 3;
  cfg.train.stages = 2;
  cfg.train.hidden_nodes = 30;
  const auto steps = run_incremental_experiment(train, test, cfg, DescriptorExtractor());
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].batch_pct == 33);
  CHECK(steps[1].batch_pct == 66);
  CHECK(steps[2].batch_pct == 100);
  CHECK(steps[0].training_samples == 20);
  CHECK(steps[2].training_samples == 60);
  CHECK(steps[0].update_millis == 0.0);
  for (const auto& s : steps) {
    CHECK(s.evaluation.errors.size() == 20);
    CHECK(s.mean_nme == s.evaluation.mean_nme());
  }
}

TEST_CASE("synthetic benchmark splits are distinct and reproducible") {
  SyntheticBenchmark b;
  b.train_samples = 5;
  b.test_samples = 3;
  const Dataset tr = b.train(), te = b.test();
  CHECK(tr.size() == 5);
  CHECK(te.size() == 3);
  CHECK_FALSE(tr.samples[0].truth == te.samples[0].truth);
  CHECK(b.train().samples[4].truth == tr.samples[4].truth);
}
