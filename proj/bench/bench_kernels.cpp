// OpenMP kernels against their serial references, plus the incremental update.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "icr/dataset.hpp"
#include "icr/elm.hpp"
#include "icr/features.hpp"

using namespace icr;

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

// rows x (29 landmarks * 128) design, 500 hidden nodes
void BM_HiddenMatrix(benchmark::State& state) {
  const HiddenLayer layer = init_hidden_layer(3712, 500, 1);
  const Matrix x = uniform(state.range(0), 3712, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hidden_matrix(layer, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_HiddenMatrixReference(benchmark::State& state) {
  const HiddenLayer layer = init_hidden_layer(3712, 500, 1);
  const Matrix x = uniform(state.range(0), 3712, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hidden_matrix_reference(layer, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct FeatureInput {
  Dataset data = generate_synthetic(64, 29, 0.02, 3);
  std::vector<Shape> shapes;
  FeatureInput() {
    for (const auto& s : data.samples) shapes.push_back(s.truth);
  }
};

const FeatureInput& features_input() {
  static const FeatureInput in;
  return in;
}

void BM_FeatureMatrix(benchmark::State& state) {
  const auto& in = features_input();
  const DescriptorExtractor ex;
  for (auto _ : state) benchmark::DoNotOptimize(extract_feature_matrix(in.data.samples, in.shapes, ex));
  state.SetItemsProcessed(state.iterations() * in.shapes.size());
}

void BM_FeatureMatrixReference(benchmark::State& state) {
  const auto& in = features_input();
  const DescriptorExtractor ex;
  for (auto _ : state) benchmark::DoNotOptimize(extract_feature_matrix_reference(in.data.samples, in.shapes, ex));
  state.SetItemsProcessed(state.iterations() * in.shapes.size());
}

// 133 new rows folded into a model that has seen range(0) rows
void BM_IncrementalUpdate(benchmark::State& state) {
  const HiddenLayer layer = init_hidden_layer(3712, 500, 4);
  const ElmModel model = batch_train(layer, uniform(state.range(0), 3712, 5), uniform(state.range(0), 58, 6), 1.0);
  const Matrix x = uniform(133, 3712, 7), y = uniform(133, 58, 8);
  for (auto _ : state) benchmark::DoNotOptimize(incremental_update(model, x, y));
}

}  // namespace

BENCHMARK(BM_HiddenMatrix)->Arg(133)->Arg(798)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HiddenMatrixReference)->Arg(133)->Arg(798)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeatureMatrix)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeatureMatrixReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IncrementalUpdate)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
