// softgrove command-line entry point: train, benchmark, gradcheck, synth, eval.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "softgrove/commands.hpp"
#include "softgrove/errors.hpp"

using namespace softgrove;

namespace {

struct DataFlags {
  std::string data;
  std::string synth_name;
  std::size_t n = 400;
  std::string task = "binary";

  void add(CLI::App* cmd) {
    auto* data_opt = cmd->add_option("--data", data, "CSV file (header row, target in last column)");
    auto* synth_opt = cmd->add_option("--synth", synth_name, "synthetic dataset: xor, two_gaussians, ring")
                          ->check(CLI::IsMember({"xor", "two_gaussians", "ring"}));
    data_opt->excludes(synth_opt);
    cmd->add_option("--n", n, "rows for --synth")->check(CLI::Range(std::size_t{8}, std::size_t{100000000}));
    cmd->add_option("--task", task, "regression, binary or multiclass")
        ->check(CLI::IsMember({"regression", "binary", "multiclass"}));
  }

  DataSource source() const {
    DataSource s;
    s.csv = data;
    s.synth_name = synth_name;
    s.synth_n = n;
    s.task = parse_task(task);
    return s;
  }
};

struct ConfigFlags {
  int epochs = 100;
  int batch = 1;
  std::uint64_t seed = 0;
  double growth_threshold = 1e-2;
  double init_scale = 1e-2;
  double prune_eps = 1e-2;
  int max_depth = 8;

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--growth-threshold", growth_threshold, "split a childless node once gamma < 1 - this")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    cmd->add_option("--init-scale", init_scale, "new gate weights ~ U[-s, s]")->check(CLI::PositiveNumber);
    cmd->add_option("--prune-eps", prune_eps, "prune nodes with gamma >= 1 - eps after training")
        ->check(CLI::Range(0.0, 1.0 - 1e-12));
    cmd->add_option("--max-depth", max_depth, "no growth below this depth")->check(CLI::NonNegativeNumber);
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.seed = seed;
    c.growth_threshold = growth_threshold;
    c.init_scale = init_scale;
    c.prune_eps = prune_eps;
    c.max_depth = max_depth;
    return c;
  }
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<GridPoint> grid_from_flag(const std::string& spec) {
  return spec == "default" ? default_grid() : parse_grid(spec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softgrove: budding and distributed soft decision trees"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file with option defaults");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // train
  auto* train = app.add_subcommand("train", "train one model on a 2:1 train/validation split");
  DataFlags train_data;
  ConfigFlags train_cfg;
  std::string train_model = "budding";
  std::optional<double> train_lr;
  std::optional<double> train_lambda;
  std::string train_grid;
  std::string train_out;
  train_data.add(train);
  train_cfg.add(train);
  train->add_option("--model", train_model, "hard, budding or distributed")
      ->check(CLI::IsMember({"hard", "budding", "distributed"}));
  train->add_option("--lr", train_lr, "learning rate (single grid point)")->check(CLI::NonNegativeNumber);
  train->add_option("--lambda", train_lambda, "leafness penalty (single grid point)")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--grid", train_grid, "'lr=..;lambda=..' or 'default' (used when --lr is absent)");
  train->add_option("--out", train_out, "output directory for model.json and history.csv")->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "holdout + 5x2 CV comparison with significance tests");
  DataFlags bench_data;
  ConfigFlags bench_cfg;
  std::string bench_models = "budding,distributed";
  std::string bench_grid = "default";
  double bench_alpha = 0.05;
  std::string bench_out;
  bench_data.add(bench);
  bench_cfg.add(bench);
  bench->add_option("--models", bench_models, "comma list of hard, budding, distributed");
  bench->add_option("--grid", bench_grid, "'lr=..;lambda=..' or 'default'");
  bench->add_option("--alpha", bench_alpha, "significance level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  bench->add_option("--out", bench_out, "output directory for report.json and report.txt");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "compare backpropagation with finite differences");
  GradcheckOptions grad_opts;
  grad->add_option("--trials", grad_opts.trials)->check(CLI::PositiveNumber);
  grad->add_option("--depth", grad_opts.depth)->check(CLI::NonNegativeNumber);
  grad->add_option("--dim", grad_opts.dim)->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_opts.seed);
  grad->add_option("--step", grad_opts.step)->check(CLI::PositiveNumber);
  grad->add_option("--batch", grad_opts.batch)->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", grad_opts.tolerance)->check(CLI::PositiveNumber);
  grad->add_flag("--corrupt-gradient", grad_opts.corrupt, "test hook: perturb the analytic gradient")
      ->group("");

  // synth
  auto* syn = app.add_subcommand("synth", "write a synthetic dataset as CSV");
  SynthOptions synth_opts;
  syn->add_option("--name", synth_opts.name)->check(CLI::IsMember({"xor", "two_gaussians", "ring"}));
  syn->add_option("--n", synth_opts.n)->check(CLI::Range(std::size_t{8}, std::size_t{100000000}));
  syn->add_option("--seed", synth_opts.seed);
  syn->add_option("--out", synth_opts.out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a saved model on a CSV file");
  EvalOptions eval_opts;
  ev->add_option("--model", eval_opts.model)->required();
  ev->add_option("--data", eval_opts.data)->required();
  ev->add_flag("--harden", eval_opts.harden, "report the active-leaf histogram of the hardened tree");
  ev->add_option("--threshold", eval_opts.threshold, "gate threshold for hardening")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      TrainOptions o;
      o.source = train_data.source();
      o.model = train_model;
      o.config = train_cfg.config();
      if (train_lr || train_lambda) {
        o.config.learning_rate = train_lr.value_or(o.config.learning_rate);
        o.config.lambda = train_lambda.value_or(0.0);
      } else {
        o.grid = grid_from_flag(train_grid.empty() ? "default" : train_grid);
      }
      o.out_dir = train_out;
      run_train(o, std::cout);
    } else if (*bench) {
      BenchmarkOptions o;
      o.source = bench_data.source();
      o.models = split_commas(bench_models);
      o.grid = grid_from_flag(bench_grid);
      o.config = bench_cfg.config();
      o.alpha = bench_alpha;
      o.out_dir = bench_out;
      run_benchmark(o, std::cout);
    } else if (*grad) {
      const auto result = run_gradcheck(grad_opts, std::cout);
      if (!result.passed) {
        std::cerr << "gradient check failed: max relative error " << result.max_rel_error << " at ("
                  << result.worst_kind << ", " << result.worst_task << ", " << result.worst_param << ")\n";
        return kExitCheckFailed;
      }
    } else if (*syn) {
      run_synth(synth_opts, std::cout);
    } else if (*ev) {
      run_eval(eval_opts, std::cout);
    }
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const StructuralError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
