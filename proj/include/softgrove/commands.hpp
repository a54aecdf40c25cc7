#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softgrove/serialize.hpp"
#include "softgrove/stats.hpp"
#include "softgrove/training.hpp"

namespace softgrove {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitTraining = 3,
  kExitCheckFailed = 4,
};

// Learning rate in {0.01, 0.05, 0.1, 0.5} x lambda in {0, 1e-4, 1e-3, 1e-2}.
std::vector<GridPoint> default_grid();

// "lr=0.01,0.1;lambda=0,1e-3" -> cartesian product, learning-rate major.
std::vector<GridPoint> parse_grid(const std::string& spec);

// Where the data comes from: a CSV path, or a synthetic generator.
struct DataSource {
  std::filesystem::path csv;
  std::string synth_name;
  std::size_t synth_n = 400;
  Task task = Task::binary;

  Dataset load(std::uint64_t seed) const;
  std::string label() const;
};

struct TrainOptions {
  DataSource source;
  std::string model = "budding";  // hard, budding, distributed
  TrainConfig config;
  std::vector<GridPoint> grid;    // empty: the single point in config
  std::filesystem::path out_dir;  // empty: nothing written
};

struct TrainOutcome {
  ModelFile model;
  GridPoint chosen;
  TrainHistory history;
  double valid_metric = 0.0;
  double train_metric = 0.0;
  std::size_t size = 0;
  std::vector<std::string> warnings;
};

TrainOutcome run_train(const TrainOptions& options, std::ostream& log);

struct BenchmarkOptions {
  DataSource source;
  std::vector<std::string> models{"budding", "distributed"};
  std::vector<GridPoint> grid = default_grid();
  TrainConfig config;  // seed is the run seed
  double alpha = 0.05;
  std::filesystem::path out_dir;
};

struct BenchmarkOutcome {
  ReportRow row;
  Json report;  // row fields plus seed and config
  std::string text;
};

// Test-third holdout, 5x2 folds over the rest, per-fold tuning/training,
// test-set evaluation of each fold model, and significance marks.
BenchmarkOutcome run_benchmark(const BenchmarkOptions& options, std::ostream& log);

struct GradcheckOptions {
  int trials = 100;
  int depth = 3;
  int dim = 5;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  int batch = 16;
  // Test hook: perturbs one analytic gradient component per trial.
  bool corrupt = false;
};

struct GradcheckOutcome {
  int trials = 0;
  double max_rel_error = 0.0;
  std::string worst_kind;
  std::string worst_task;
  std::string worst_param;
  bool passed = false;
};

GradcheckOutcome run_gradcheck(const GradcheckOptions& options, std::ostream& log);

struct SynthOptions {
  std::string name = "xor";
  std::size_t n = 400;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void run_synth(const SynthOptions& options, std::ostream& log);

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  bool harden = false;
  double threshold = 0.5;
};

struct EvalOutcome {
  double metric = 0.0;
  std::size_t size = 0;
  // #active leaves -> #inputs; filled for distributed models or with harden.
  std::map<std::size_t, std::size_t> active_histogram;
};

EvalOutcome run_eval(const EvalOptions& options, std::ostream& log);

}  // namespace softgrove
