// icr: train, update, evaluate and run experiments with incremental cascaded
// ELM regression models.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "icr/cascade.hpp"
#include "icr/dataset.hpp"
#include "icr/errors.hpp"
#include "icr/experiment.hpp"
#include "icr/incremental.hpp"
#include "icr/model_io.hpp"
#include "icr/parallel.hpp"

namespace fs = std::filesystem;
using namespace icr;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string mode = "sequential";
  std::string stats_in;
  std::string eval_config = "auto";
  TrainConfig cfg{4, 500, kDefaultRidge, 0, 1};
};

struct UpdateArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string report;
  std::uint64_t seed = 0;
};

struct PredictArgs {
  std::string model;
  std::string images;
  std::string bboxes;
  std::string out_dir;
};

struct EvalArgs {
  std::string model;
  std::string data;
  std::string eval_config = "auto";
  std::string ced_out;
  std::string errors_out;
};

struct ExperimentArgs {
  std::string data;
  std::string test_data;
  std::string out_dir;
  std::string eval_config = "auto";
  IncrementalExperimentConfig cfg{6, TrainConfig{4, 500, kDefaultRidge, 0, 1}};
};

struct SynthArgs {
  std::string out_dir;
  std::size_t samples = 400;
  std::size_t landmarks = 10;
  double noise = 0.02;
  std::uint64_t seed = 2024;
};

EvalConfig eval_config_or_usage(const std::string& text, std::size_t landmarks) {
  try {
    return EvalConfig::parse(text, landmarks);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

void print_stage_nme(const std::vector<double>& nme) {
  for (std::size_t t = 0; t < nme.size(); ++t) {
    std::printf("stage %zu: mean NME %.4f\n", t, 100.0 * nme[t]);
  }
}

bool has_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") return true;
  }
  return false;
}

int run_train(const TrainArgs& a) {
  if (a.mode != "sequential" && a.mode != "parallel") throw UsageError("--mode must be sequential or parallel");
  const Dataset data = load_dataset_dir(a.data);
  const EvalConfig eval = eval_config_or_usage(a.eval_config, data.landmark_count);
  const DescriptorExtractor extractor;

  CascadeModel model;
  if (a.mode == "sequential") {
    SequentialTrace trace;
    model = train_sequential(data.samples, a.cfg, extractor, &trace);
    std::printf("sequential training, %zu samples, %zu stages, %ld hidden nodes\n", data.size(), a.cfg.stages,
                static_cast<long>(a.cfg.hidden_nodes));
    const auto nme = stage_mean_nme(trace.shapes, data.samples, eval);
    print_stage_nme(nme);
    for (std::size_t t = 1; t < nme.size(); ++t) {
      if (nme[t] > nme[t - 1]) std::printf("note: training NME did not decrease at stage %zu\n", t);
    }
  } else {
    std::vector<StageStatistics> stats;
    if (!a.stats_in.empty()) {
      stats = load_model(a.stats_in).stats;
    } else {
      std::printf("estimating stage statistics with a sequential pass\n");
      stats = train_sequential(data.samples, a.cfg, extractor).stats;
    }
    model = train_parallel(data.samples, stats, a.cfg, extractor);
    std::printf("parallel training, %zu samples, %zu stages, %ld hidden nodes\n", data.size(), a.cfg.stages,
                static_cast<long>(a.cfg.hidden_nodes));
    print_stage_nme(stage_mean_nme(apply_cascade_all(model, data.samples, extractor), data.samples, eval));
  }
  save_model(model, a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

int run_update(const UpdateArgs& a) {
  const CascadeModel model = load_model(a.model);
  Dataset data;
  if (has_images(fs::path(a.data) / "images")) data = load_dataset_dir(a.data);
  if (!data.samples.empty() && data.landmark_count != model.landmarks()) {
    std::cerr << "error: data has " << data.landmark_count << " landmarks, model has " << model.landmarks() << "\n";
    return kExitRuntime;
  }
  auto [updated, report] = update_model(model, data.samples, a.seed);
  save_model(updated, a.out);
  if (!a.report.empty()) write_file_atomically(a.report, update_report_csv(report));
  std::printf("updated %zu stages with %zu samples in %.2f ms\n", report.stages.size(), report.rows(),
              report.wall_millis);
  return 0;
}

int run_predict(const PredictArgs& a) {
  const CascadeModel model = load_model(a.model);
  const Dataset data = load_images_for_prediction(a.images, a.bboxes);
  const auto shapes = apply_cascade_all(model, data.samples, DescriptorExtractor(model.descriptor));
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& sample = data.samples[i];
    save_pts(to_source_frame(shapes.back()[i], sample.frame), fs::path(a.out_dir) / (sample.id + ".pts"));
  }
  std::printf("wrote %zu predictions to %s\n", data.size(), a.out_dir.c_str());
  return 0;
}

int run_eval(const EvalArgs& a) {
  const CascadeModel model = load_model(a.model);
  const Dataset data = load_dataset_dir(a.data);
  if (data.landmark_count != model.landmarks()) {
    std::cerr << "error: data has " << data.landmark_count << " landmarks, model has " << model.landmarks() << "\n";
    return kExitRuntime;
  }
  const EvalConfig eval = eval_config_or_usage(a.eval_config, data.landmark_count);
  const Evaluation result = evaluate_model(model, data.samples, eval, DescriptorExtractor(model.descriptor));
  for (const auto& id : result.excluded) std::cerr << "excluded '" << id << "': zero inter-pupil distance\n";
  if (result.errors.empty()) {
    std::cerr << "error: every sample was excluded\n";
    return kExitRuntime;
  }
  if (!a.errors_out.empty()) write_file_atomically(a.errors_out, errors_csv(result));
  if (!a.ced_out.empty()) write_file_atomically(a.ced_out, ced_csv(result.ced));
  std::printf("samples: %zu, excluded: %zu\n", result.errors.size(), result.excluded.size());
  std::printf("mean NME: %.17g\n", 100.0 * result.mean_nme());
  return 0;
}

int run_experiment(const ExperimentArgs& a) {
  Dataset train = load_dataset_dir(a.data);
  Dataset test = load_dataset_dir(a.test_data);
  if (train.landmark_count != test.landmark_count) {
    std::cerr << "error: train and test landmark counts differ\n";
    return kExitRuntime;
  }
  if (a.cfg.batches > train.size()) {
    std::cerr << "error: cannot split " << train.size() << " samples into " << a.cfg.batches << " batches\n";
    return kExitRuntime;
  }
  test.eval_preset = a.eval_config;
  eval_config_or_usage(a.eval_config, test.landmark_count);
  const auto steps = run_incremental_experiment(train, test, a.cfg, DescriptorExtractor());
  fs::create_directories(a.out_dir);
  for (const auto& s : steps) {
    write_file_atomically(fs::path(a.out_dir) / ("ced_" + std::to_string(s.batch_pct) + ".csv"),
                          ced_csv(s.evaluation.ced));
    std::printf("%d%%: %zu training samples, mean NME %.4f, update %.2f ms\n", s.batch_pct, s.training_samples,
                100.0 * s.mean_nme, s.update_millis);
  }
  write_file_atomically(fs::path(a.out_dir) / "summary.csv", incremental_summary_csv(steps));
  return 0;
}

int run_synth(const SynthArgs& a) {
  const Dataset data = generate_synthetic(a.samples, a.landmarks, a.noise, a.seed);
  save_dataset(data, a.out_dir);
  std::printf("wrote %zu synthetic samples to %s\n", data.size(), a.out_dir.c_str());
  return 0;
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--stages", cfg.stages, "cascade stages")->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
  cmd->add_option("--hidden-nodes", cfg.hidden_nodes, "hidden nodes per stage")
      ->check(CLI::Range(Eigen::Index{1}, Eigen::Index{100000}));
  cmd->add_option("--ridge", cfg.ridge, "ridge added to the Gram matrix")->check(CLI::NonNegativeNumber);
  cmd->add_option("--perturbations", cfg.perturbations, "Monte-Carlo draws per image in parallel training")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();

  CLI::App app{"Incremental cascaded ELM regression for landmark alignment"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a cascade model");
  train_cmd->add_option("--data", train.data, "dataset root (images/, annotations/, bboxes.csv)")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train.out, "output model file")->required();
  train_cmd->add_option("--mode", train.mode, "sequential or parallel")
      ->check(CLI::IsMember({"sequential", "parallel"}));
  train_cmd->add_option("--seed", train.cfg.seed, "random seed");
  train_cmd->add_option("--stats-in", train.stats_in, "model file whose stage statistics seed parallel training")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--eval-config", train.eval_config, "auto, ibug68, lfpw29, synthetic or 'l,..;r,..'");
  add_train_flags(train_cmd, train.cfg);

  UpdateArgs update;
  auto* update_cmd = app.add_subcommand("update", "fold a new batch into a trained model");
  update_cmd->add_option("--model", update.model, "input model")->required()->check(CLI::ExistingFile);
  update_cmd->add_option("--data", update.data, "dataset root of the new batch")->required();
  update_cmd->add_option("--out", update.out, "output model file")->required();
  update_cmd->add_option("--seed", update.seed, "random seed for the perturbation draws");
  update_cmd->add_option("--report", update.report, "update report CSV");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "align faces and write .pts predictions");
  predict_cmd->add_option("--model", predict_args.model)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--images", predict_args.images)->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--bboxes", predict_args.bboxes)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out-dir", predict_args.out_dir)->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model against annotated data");
  eval_cmd->add_option("--model", eval.model)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--eval-config", eval.eval_config, "auto, ibug68, lfpw29, synthetic or 'l,..;r,..'");
  eval_cmd->add_option("--ced-out", eval.ced_out, "CED CSV (threshold,fraction)");
  eval_cmd->add_option("--errors-out", eval.errors_out, "per-sample CSV (id,nme)");

  ExperimentArgs experiment;
  auto* exp_cmd = app.add_subcommand("experiment-incremental", "batch-by-batch online learning experiment");
  exp_cmd->add_option("--data", experiment.data)->required()->check(CLI::ExistingDirectory);
  exp_cmd->add_option("--test-data", experiment.test_data)->required()->check(CLI::ExistingDirectory);
  exp_cmd->add_option("--batches", experiment.cfg.batches)->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  exp_cmd->add_option("--seed", experiment.cfg.train.seed);
  exp_cmd->add_option("--out-dir", experiment.out_dir)->required();
  exp_cmd->add_option("--eval-config", experiment.eval_config);
  add_train_flags(exp_cmd, experiment.cfg.train);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset to disk");
  synth_cmd->add_option("--out-dir", synth.out_dir)->required();
  synth_cmd->add_option("--samples", synth.samples)->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
  synth_cmd->add_option("--landmarks", synth.landmarks)->check(CLI::Range(std::size_t{2}, std::size_t{10000}));
  synth_cmd->add_option("--noise", synth.noise)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*update_cmd) return run_update(update);
    if (*predict_cmd) return run_predict(predict_args);
    if (*eval_cmd) return run_eval(eval);
    if (*exp_cmd) return run_experiment(experiment);
    if (*synth_cmd) return run_synth(synth);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
