#include "softgrove/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "softgrove/errors.hpp"
#include "softgrove/parallel.hpp"
#include "softgrove/random_tree.hpp"

namespace softgrove {

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("grid: cannot parse '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw std::invalid_argument("grid: empty value list for " + key);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["growth_threshold"] = c.growth_threshold;
  j["init_scale"] = c.init_scale;
  j["prune_eps"] = c.prune_eps;
  j["max_depth"] = c.max_depth;
  return j;
}

Json grid_json(const std::vector<GridPoint>& grid) {
  Json j = Json::array();
  for (const GridPoint& g : grid) j.push_back({{"lr", g.learning_rate}, {"lambda", g.lambda}});
  return j;
}

bool is_soft_model(const std::string& name) { return name == "budding" || name == "distributed"; }

void check_model_name(const std::string& name) {
  if (name != "hard" && !is_soft_model(name)) {
    throw std::invalid_argument("unknown model '" + name + "' (expected hard, budding or distributed)");
  }
}

// Per-dataset preparation shared by train and benchmark.
struct Prepared {
  Dataset trainval;
  Dataset test;
  NormalizationStats stats;
};

Prepared split_and_normalize(const Dataset& data, std::uint64_t seed) {
  const auto [tv_idx, test_idx] = split_test_third(data, seed);
  Prepared p{data.subset(tv_idx), data.subset(test_idx), {}};
  std::vector<Dataset> others;
  others.push_back(std::move(p.test));
  p.stats = normalize(p.trainval, others);
  p.test = std::move(others.front());
  return p;
}

}  // namespace

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> g;
  for (const double lr : {0.01, 0.05, 0.1, 0.5}) {
    for (const double lambda : {0.0, 1e-4, 1e-3, 1e-2}) g.push_back({lr, lambda});
  }
  return g;
}

std::vector<GridPoint> parse_grid(const std::string& spec) {
  std::vector<double> lrs{0.1};
  std::vector<double> lambdas{0.0};
  std::stringstream ss(spec);
  std::string part;
  bool any = false;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("grid: expected key=values in '" + part + "'");
    const std::string key = part.substr(0, eq);
    const auto values = parse_list(part.substr(eq + 1), key);
    if (key == "lr") {
      lrs = values;
    } else if (key == "lambda") {
      lambdas = values;
    } else {
      throw std::invalid_argument("grid: unknown key '" + key + "' (expected lr or lambda)");
    }
    any = true;
  }
  if (!any) throw std::invalid_argument("grid: empty specification");
  std::vector<GridPoint> g;
  for (const double lr : lrs) {
    if (!(lr >= 0.0)) throw std::invalid_argument("grid: learning rates must be nonnegative");
    for (const double lambda : lambdas) {
      if (!(lambda >= 0.0)) throw std::invalid_argument("grid: lambda must be nonnegative");
      g.push_back({lr, lambda});
    }
  }
  return g;
}

Dataset DataSource::load(std::uint64_t seed) const {
  if (!synth_name.empty()) {
    Dataset d = synth(synth_name, synth_n, seed);
    if (task != Task::binary) throw std::invalid_argument("synthetic datasets are binary classification tasks");
    return d;
  }
  if (csv.empty()) throw std::invalid_argument("no data source given (use --data or --synth)");
  return load_csv(csv, task);
}

std::string DataSource::label() const {
  if (!synth_name.empty()) return synth_name + "-" + std::to_string(synth_n);
  return csv.stem().string();
}

TrainOutcome run_train(const TrainOptions& options, std::ostream& log) {
  check_model_name(options.model);
  options.config.check();
  const std::uint64_t seed = options.config.seed;
  const Dataset data = options.source.load(seed);
  const Prepared prep = split_and_normalize(data, seed);
  const Dataset& train = prep.trainval;
  const Dataset& valid = prep.test;

  TrainOutcome out;
  out.model.normalization = prep.stats;
  out.model.classes = data.class_names;

  std::vector<GridPoint> grid = options.grid;
  if (grid.empty()) grid.push_back({options.config.learning_rate, options.config.lambda});
  for (const GridPoint& g : grid) {
    if (g.learning_rate == 0.0 && options.model != "hard") {
      out.warnings.push_back("learning rate 0: the model stays the initial bud");
    }
  }
  for (const auto& w : out.warnings) log << "warning: " << w << "\n";

  if (options.model == "hard") {
    HardTree t = grow_hard(train, valid);
    out.valid_metric = metric(predict_scores(t, valid), valid);
    out.train_metric = metric(predict_scores(t, train), train);
    out.size = tree_size(t);
    out.model.model = std::move(t);
  } else {
    const TreeKind kind = parse_tree_kind(options.model);
    std::vector<FitResult> fits(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
      TrainConfig c = options.config;
      c.learning_rate = grid[g].learning_rate;
      c.lambda = grid[g].lambda;
      c.seed = derive_seed(seed, 0, g);
      fits[g] = sgd_fit(kind, train, valid, c);
    });
    const bool higher = higher_is_better(data.task);
    std::size_t best = 0;
    std::vector<double> scores;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      scores.push_back(metric(predict_raw(fits[g].tree, valid), valid));
      const bool better = higher ? scores[g] > scores[best] : scores[g] < scores[best];
      if (g > 0 && better) best = g;
    }
    out.chosen = grid[best];
    out.history = fits[best].history;
    out.valid_metric = scores[best];
    out.train_metric = metric(predict_raw(fits[best].tree, train), train);
    out.size = tree_size(fits[best].tree);
    out.model.model = std::move(fits[best].tree);
  }

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    save_model(out.model, options.out_dir / "model.json");
    write_text(options.out_dir / "history.csv", out.history.to_csv());
  }
  log << "model=" << options.model << " lr=" << out.chosen.learning_rate
      << " lambda=" << out.chosen.lambda << "\n";
  log << "valid_metric=" << out.valid_metric << " train_metric=" << out.train_metric
      << " size=" << out.size << "\n";
  return out;
}

BenchmarkOutcome run_benchmark(const BenchmarkOptions& options, std::ostream& log) {
  if (options.models.empty()) throw std::invalid_argument("no models given");
  for (const auto& m : options.models) check_model_name(m);
  if (options.grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
  options.config.check();
  const std::uint64_t seed = options.config.seed;

  Dataset data;
  try {
    data = options.source.load(seed);
  } catch (const std::exception& e) {
    throw DataError(std::string("load stage: ") + e.what());
  }
  Prepared prep;
  FoldPlan folds;
  try {
    prep = split_and_normalize(data, seed);
    folds = cv_5x2(prep.trainval, seed ^ 0x5bd1e995ULL);
  } catch (const std::exception& e) {
    throw DataError(std::string("split stage: ") + e.what());
  }
  const std::string dataset = options.source.label();
  const std::size_t nf = folds.pairs.size();

  std::vector<EvalReport> reports;
  Json chosen = Json::object();
  for (const std::string& name : options.models) {
    EvalReport rep;
    rep.model = name;
    rep.dataset = dataset;
    rep.metric_folds.resize(nf);
    rep.size_folds.resize(nf);
    try {
      if (name == "hard") {
        parallel_for(nf, [&](std::size_t f) {
          const Dataset tr = prep.trainval.subset(folds.pairs[f].train);
          const Dataset va = prep.trainval.subset(folds.pairs[f].valid);
          const HardTree t = grow_hard(tr, va);
          rep.metric_folds[f] = metric(predict_scores(t, prep.test), prep.test);
          rep.size_folds[f] = static_cast<double>(tree_size(t));
        });
      } else {
        const TuneResult tuned = tune(parse_tree_kind(name), prep.trainval, options.grid, options.config, folds);
        for (std::size_t f = 0; f < nf; ++f) {
          const SoftTree& t = tuned.models[tuned.best][f];
          rep.metric_folds[f] = metric(predict_raw(t, prep.test), prep.test);
          rep.size_folds[f] = static_cast<double>(tree_size(t));
        }
        chosen[name] = {{"lr", tuned.grid[tuned.best].learning_rate},
                        {"lambda", tuned.grid[tuned.best].lambda}};
      }
    } catch (const TrainingError& e) {
      throw TrainingError("training stage (" + name + "): " + e.what(), e.epoch());
    }
    log << name << ": mean test metric " << rep.metric_mean() << ", mean size " << rep.size_mean() << "\n";
    reports.push_back(std::move(rep));
  }

  BenchmarkOutcome out;
  out.row = compare(std::move(reports), options.alpha, higher_is_better(data.task));
  out.report = row_json(out.row);
  out.report["task"] = std::string(to_string(data.task));
  out.report["seed"] = seed;
  Json cfg = config_json(options.config);
  cfg["grid"] = grid_json(options.grid);
  cfg["models"] = options.models;
  cfg["rows"] = data.rows;
  cfg["test_rows"] = prep.test.rows;
  out.report["config"] = std::move(cfg);
  out.report["selected"] = std::move(chosen);
  const ReportRow rows[] = {out.row};
  out.text = report_text(rows);

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    write_text(options.out_dir / "report.json", out.report.dump(2) + "\n");
    write_text(options.out_dir / "report.txt", out.text);
  }
  log << out.text;
  return out;
}

GradcheckOutcome run_gradcheck(const GradcheckOptions& options, std::ostream& log) {
  if (options.trials < 1) throw std::invalid_argument("trials must be positive");
  if (options.depth < 0) throw std::invalid_argument("depth must be nonnegative");
  if (options.dim < 1) throw std::invalid_argument("dim must be positive");
  if (options.batch < 1) throw std::invalid_argument("batch must be positive");

  constexpr TreeKind kinds[] = {TreeKind::soft, TreeKind::budding, TreeKind::distributed};
  constexpr Task tasks[] = {Task::regression, Task::binary, Task::multiclass};
  std::mt19937_64 rng(options.seed);
  GradcheckOutcome out;
  for (int trial = 0; trial < options.trials; ++trial) {
    const TreeKind kind = kinds[trial % 3];
    const Task task = tasks[(trial / 3) % 3];
    const int dim = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(options.dim));
    int k = 1;
    if (task == Task::regression) k = 1 + static_cast<int>(rng() % 2);
    if (task == Task::multiclass) k = 3;

    RandomTreeOptions topt;
    topt.depth = options.depth;
    topt.unit_leaf_gamma = trial % 2 == 0;
    const SoftTree tree = random_tree(kind, task, dim, k, topt, rng);
    const Dataset batch = random_dataset(task, static_cast<std::size_t>(options.batch),
                                         static_cast<std::size_t>(dim), k, rng);
    const LossSpec spec = LossSpec::for_task(task, trial % 4 == 3 ? 0.01 : 0.0);

    ParamGrads analytic = backward(tree, batch, spec);
    if (options.corrupt) analytic.nodes.front().d_rho.front() += 1.0;
    const ParamGrads numeric = finite_diff_grads(tree, batch, spec, options.step);
    const auto a = analytic.flatten();
    const auto n = numeric.flatten();
    const auto names = analytic.names();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = relative_error(a[i], n[i]);
      if (!(err <= out.max_rel_error)) {
        out.max_rel_error = std::isnan(err) ? INFINITY : err;
        out.worst_kind = std::string(to_string(kind));
        out.worst_task = std::string(to_string(task));
        out.worst_param = names[i];
      }
    }
    ++out.trials;
  }
  out.passed = out.max_rel_error <= options.tolerance;
  log << "trials=" << out.trials << " max_rel_error=" << out.max_rel_error;
  if (!out.worst_param.empty()) {
    log << " worst=(" << out.worst_kind << ", " << out.worst_task << ", " << out.worst_param << ")";
  }
  log << (out.passed ? " PASS" : " FAIL") << "\n";
  return out;
}

void run_synth(const SynthOptions& options, std::ostream& log) {
  const Dataset d = synth(options.name, options.n, options.seed);
  if (options.out.empty()) throw std::invalid_argument("synth needs --out");
  if (options.out.has_parent_path()) std::filesystem::create_directories(options.out.parent_path());
  write_csv(d, options.out);
  log << "wrote " << d.rows << " rows x " << d.dim << " features to " << options.out.string() << "\n";
}

EvalOutcome run_eval(const EvalOptions& options, std::ostream& log) {
  const ModelFile model = load_model(options.model);
  Dataset data = load_csv(options.data, model.task());
  if (data.dim != static_cast<std::size_t>(model.input_dim())) {
    throw DataError("dimension mismatch: model expects d=" + std::to_string(model.input_dim()) +
                    ", data has d=" + std::to_string(data.dim));
  }
  if (!model.classes.empty()) align_classes(data, model.classes);
  if (model.normalization) model.normalization->apply(data);

  EvalOutcome out;
  out.size = model.size();
  if (const auto* hard = std::get_if<HardTree>(&model.model)) {
    out.metric = metric(predict_scores(*hard, data), data);
  } else {
    const auto& soft = std::get<SoftTree>(model.model);
    out.metric = metric(predict_raw(soft, data), data);
    if (options.harden || soft.kind == TreeKind::distributed) {
      const SoftTree hardened = soft.hardened() ? soft : harden(soft, options.threshold);
      std::vector<double> x(data.dim + 1);
      for (std::size_t i = 0; i < data.rows; ++i) {
        data.augmented(i, x);
        ++out.active_histogram[active_leaves(hardened, x).size()];
      }
    }
  }
  log << "metric=" << out.metric << " size=" << out.size << "\n";
  if (!out.active_histogram.empty()) {
    log << "active_leaves:";
    for (const auto& [count, freq] : out.active_histogram) log << " " << count << ":" << freq;
    log << "\n";
  }
  return out;
}

}  // namespace softgrove
