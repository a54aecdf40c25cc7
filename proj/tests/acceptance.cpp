// Acceptance suite: one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "softgrove/commands.hpp"
#include "softgrove/data.hpp"
#include "softgrove/gradients.hpp"
#include "softgrove/random_tree.hpp"
#include "softgrove/serialize.hpp"
#include "softgrove/stats.hpp"
#include "softgrove/training.hpp"

using namespace softgrove;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(SOFTGROVE_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("softgrove_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

std::vector<double> random_input(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> x(static_cast<std::size_t>(dim) + 1);
  x[0] = 1.0;
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = normal(rng);
  return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Task task_of(int i) {
  static const Task tasks[] = {Task::regression, Task::binary, Task::multiclass};
  return tasks[i % 3];
}

int outputs_of(Task t) { return t == Task::multiclass ? 3 : 1; }

Outcome gradient_oracle() {
  const auto start = Clock::now();
  const CliRun r = cli("gradcheck --trials 100 --depth 3 --dim 5 --step 1e-5 --tolerance 1e-4");
  const double secs = seconds_since(start);
  std::string line = r.output.substr(0, r.output.find('\n'));
  return {r.code == 0 && secs < 60.0, line + fmt(" (%.1f s)", secs)};
}

Outcome reduction_identity() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Task task = task_of(i);
    const int dim = 1 + i % 5;
    RandomTreeOptions opt;
    opt.depth = 1 + i % 4;
    opt.unit_leaf_gamma = i % 2 == 0;
    SoftTree dist = random_tree(TreeKind::distributed, task, dim, outputs_of(task), opt, rng);
    SoftTree bud = dist;
    bud.kind = TreeKind::budding;
    for (SoftNode* n : preorder(dist)) {
      n->v = n->w;
      for (double& v : n->v) v = -v;
    }
    for (SoftNode* n : preorder(bud)) n->v.clear();
    const auto x = random_input(dim, rng);
    worst = std::max(worst, max_abs_diff(eval_distributed(dist, x), eval_budding(bud, x)));
  }
  return {worst <= 1e-12, fmt("1000 pairs, max |diff| = %.3g", worst)};
}

Outcome conversion_equivalence() {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (const TreeKind kind : {TreeKind::budding, TreeKind::distributed}) {
    for (int i = 0; i < 1000; ++i) {
      const Task task = task_of(i);
      const int dim = 1 + i % 5;
      RandomTreeOptions opt;
      opt.depth = 1 + i % 4;
      const SoftTree t = random_tree(kind, task, dim, outputs_of(task), opt, rng);
      const SoftTree s = to_soft(t);
      const auto x = random_input(dim, rng);
      worst = std::max(worst, max_abs_diff(evaluate(s, x), evaluate(t, x)));
    }
  }
  return {worst <= 1e-9, fmt("2 x 1000 pairs (budding, distributed), max |diff| = %.3g", worst)};
}

Outcome locality() {
  std::mt19937_64 rng(13);
  std::size_t single = 0;
  const std::size_t inputs = 10000;
  for (std::size_t i = 0; i < inputs; ++i) {
    RandomTreeOptions opt;
    opt.depth = 2 + static_cast<int>(i % 4);
    opt.unit_leaf_gamma = i % 2 == 0;
    const SoftTree t = harden(random_tree(TreeKind::budding, Task::regression, 3, 1, opt, rng));
    single += active_leaves(t, random_input(3, rng)).size() == 1;
  }

  SoftTree built = make_bud(TreeKind::distributed, Task::regression, 2, {0.0});
  built.root.gamma = 0.0;
  built.root.w = {5.0, 0.0, 0.0};
  built.root.v = {5.0, 0.0, 0.0};
  for (auto* child : {&built.root.left, &built.root.right}) {
    *child = std::make_unique<SoftNode>();
    (*child)->gamma = 1.0;
    (*child)->w.assign(3, 0.0);
    (*child)->v.assign(3, 0.0);
    (*child)->rho = {1.0};
  }
  const std::size_t built_active = active_leaves(harden(built), std::vector<double>{1.0, 0.3, -0.2}).size();

  std::set<std::size_t> cardinalities;
  for (int i = 0; i < 200; ++i) {
    RandomTreeOptions opt;
    opt.depth = 3;
    opt.weight_scale = 2.0;
    const SoftTree t = harden(random_tree(TreeKind::distributed, Task::regression, 3, 1, opt, rng));
    for (int j = 0; j < 50; ++j) cardinalities.insert(active_leaves(t, random_input(3, rng)).size());
  }
  std::string hist;
  for (const std::size_t c : cardinalities) hist += " " + std::to_string(c);
  const bool pass = single == inputs && built_active >= 2 && cardinalities.size() >= 3;
  return {pass, "budding single-leaf " + std::to_string(single) + "/" + std::to_string(inputs) +
                    ", constructed distributed " + std::to_string(built_active) +
                    " leaves, distinct cardinalities {" + hist + " }"};
}

double parse_field(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  if (pos == std::string::npos) return std::nan("");
  return std::stod(text.substr(pos + key.size() + 1));
}

// A single gate sigma(w.x) on the augmented input, trained to convergence by
// full-batch gradient descent on cross-entropy.
double logistic_probe_accuracy(const Dataset& d) {
  std::vector<double> w(d.dim + 1, 0.0);
  std::vector<double> x(d.dim + 1);
  for (int it = 0; it < 20000; ++it) {
    std::vector<double> grad(w.size(), 0.0);
    for (std::size_t i = 0; i < d.rows; ++i) {
      d.augmented(i, x);
      const double r = sigmoid(std::inner_product(w.begin(), w.end(), x.begin(), 0.0)) - d.labels[i];
      for (std::size_t j = 0; j < w.size(); ++j) grad[j] += r * x[j];
    }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= 0.5 * grad[j] / static_cast<double>(d.rows);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    d.augmented(i, x);
    correct += (std::inner_product(w.begin(), w.end(), x.begin(), 0.0) > 0.0) == (d.labels[i] == 1);
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(d.rows);
}

Outcome xor_check() {
  const auto start = Clock::now();
  const fs::path dir = scratch("xor");
  double best = 0.0;
  GridPoint best_point{};
  const auto grid = default_grid();
  // larger learning rates first; stop at the first point that reaches the bar
  for (auto it = grid.rbegin(); it != grid.rend() && best < 95.0; ++it) {
    std::ostringstream args;
    args << "train --synth xor --n 400 --seed 0 --model distributed --epochs 200 --lr " << it->learning_rate
         << " --lambda " << it->lambda << " --out " << dir.string();
    const CliRun r = cli(args.str());
    if (r.code != 0) continue;
    const double acc = parse_field(r.output, "train_metric");
    if (acc > best) {
      best = acc;
      best_point = *it;
    }
  }

  const Dataset d = synth("xor", 400, 0);
  const double probe = logistic_probe_accuracy(d);
  fs::remove_all(dir);
  const double secs = seconds_since(start);
  const bool pass = best >= 95.0 && probe <= 60.0 && secs < 120.0;
  return {pass, fmt("distributed train accuracy %.2f%% (lr=%g", best, best_point.learning_rate) +
                    fmt(", lambda=%g), single-gate probe %.2f%%, %.1f s", best_point.lambda, probe, secs)};
}

Outcome ring_ordering() {
  const auto start = Clock::now();
  const fs::path dir = scratch("ring");
  int wins = 0;
  std::string runs;
  for (int seed = 1; seed <= 5; ++seed) {
    const fs::path out = dir / std::to_string(seed);
    const CliRun r = cli("benchmark --synth ring --n 2000 --seed " + std::to_string(seed) +
                         " --models budding,distributed --grid default --epochs 50 --out " + out.string());
    if (r.code != 0) {
      runs += " seed" + std::to_string(seed) + ":error";
      continue;
    }
    const Json report = Json::parse(slurp(out / "report.json"));
    std::vector<double> bud;
    std::vector<double> dist;
    for (const auto& m : report["models"]) {
      (m["name"] == "budding" ? bud : dist) = m["metric_folds"].get<std::vector<double>>();
    }
    const TTestResult t = paired_t_test(dist, bud, 0.05, true);
    const double gap = mean(dist) - mean(bud);
    const bool win = gap >= 2.0 && t.winner == Winner::a;
    wins += win;
    runs += fmt(" [bud %.2f dist %.2f p=%.3g]", mean(bud), mean(dist), t.p);
  }
  fs::remove_all(dir);
  const double secs = seconds_since(start);
  return {wins >= 4 && secs < 900.0,
          std::to_string(wins) + "/5 seeds with dist >= bud + 2 and t-test winner;" + runs + fmt(" %.0f s", secs)};
}

Dataset smooth_regression(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.task = Task::regression;
  d.rows = n;
  d.dim = 3;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = normal(rng);
    const double b = normal(rng);
    const double c = normal(rng);
    d.features.insert(d.features.end(), {a, b, c});
    d.targets.push_back(std::sin(2.0 * a) + 0.5 * b * b + 0.1 * normal(rng));
  }
  return d;
}

Outcome pruning_fidelity() {
  double worst = 0.0;
  bool grew = false;
  int trees = 0;
  std::size_t removed = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<std::pair<Dataset, Dataset>> sets;
    sets.emplace_back(synth("xor", 300, seed), synth("xor", 300, seed + 100));
    sets.emplace_back(synth("ring", 400, seed), synth("ring", 400, seed + 100));
    sets.emplace_back(smooth_regression(300, seed), smooth_regression(300, seed + 100));
    for (auto& [train, test] : sets) {
      Dataset others[] = {test};
      normalize(train, others);
      const Dataset& held = others[0];
      for (const TreeKind kind : {TreeKind::budding, TreeKind::distributed}) {
        for (const double lr : {0.1, 0.5}) {
          TrainConfig c;
          c.learning_rate = lr;
          c.epochs = 30;
          c.seed = seed;
          c.prune_eps = 0.0;
          const FitResult r = sgd_fit(kind, train, train, c);
          const SoftTree pruned = prune(r.tree, 0.01);
          grew = grew || tree_size(pruned) > tree_size(r.tree);
          removed += tree_size(r.tree) - tree_size(pruned);
          auto before = predict_raw(r.tree, held);
          auto after = predict_raw(pruned, held);
          // probabilities for classification, standardized targets for regression
          const Link link = link_for(held.task);
          const std::size_t k = static_cast<std::size_t>(r.tree.output_dim);
          for (std::size_t i = 0; i < held.rows; ++i) {
            apply_link(link, std::span<double>(before).subspan(i * k, k));
            apply_link(link, std::span<double>(after).subspan(i * k, k));
          }
          worst = std::max(worst, max_abs_diff(before, after));
          ++trees;
        }
      }
    }
  }
  return {worst < 1e-2 && !grew, std::to_string(trees) + " trained trees, " + std::to_string(removed) +
                                     " nodes removed, max held-out |diff| = " + fmt("%.3g", worst) +
                                     (grew ? ", size increased" : ", size never increased")};
}

std::vector<double> random_ints(std::mt19937_64& rng, std::size_t n, int lo, int hi) {
  std::uniform_int_distribution<int> u(lo, hi);
  std::vector<double> out(n);
  for (double& x : out) x = u(rng);
  return out;
}

Outcome statistics() {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> normal(0.0, 1.0);
  int t_cases = 0;
  double t_err = 0.0;
  double p_err = 0.0;
  for (int i = 0; i < 24; ++i) {
    const std::size_t n = 3 + static_cast<std::size_t>(i % 10);
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (std::size_t j = 0; j < n; ++j) {
      a[j] = 85.0 + 3.0 * normal(rng) + 0.3 * (i % 6);
      b[j] = 85.0 + 3.0 * normal(rng);
    }
    const TTestResult r = paired_t_test(a, b);
    const oracles::TOracle o = oracles::t_oracle(a, b);
    t_err = std::max(t_err, std::abs(r.t - o.t) / std::max(1.0, std::abs(o.t)));
    p_err = std::max(p_err, std::abs(r.p - o.p));
    ++t_cases;
  }
  const std::vector<double> flat{3, 4, 5, 6};
  const bool degenerate_ok = paired_t_test(flat, flat).p == 1.0 && paired_t_test(flat, flat).degenerate &&
                             paired_t_test(flat, std::vector<double>{2, 3, 4, 5}).p == 0.0;

  int r_cases = 0;
  double r_err = 0.0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> cases{
      {{1, 2, 3}, {10, 11, 12}}, {{5, 5, 5}, {5, 5, 5, 5}}, {{3, 3, 4}, {1, 2, 3, 5, 5, 6}}};
  for (int i = 0; i < 22; ++i) {
    cases.push_back({random_ints(rng, 1 + static_cast<std::size_t>(i % 7), 0, 6),
                     random_ints(rng, 3 + static_cast<std::size_t>((i * 5) % 9), 0, 6)});
  }
  bool all_exact = true;
  for (const auto& [a, b] : cases) {
    const RankSumResult r = wilcoxon_rank_sum(a, b);
    all_exact = all_exact && r.exact;
    r_err = std::max(r_err, std::abs(r.p - oracles::enumerate_rank_sum_p(a, b)));
    ++r_cases;
  }
  const bool ties_ok = wilcoxon_rank_sum(std::vector<double>(10, 7.0), std::vector<double>(10, 7.0)).p == 1.0;
  const bool pass = t_err <= 1e-6 && p_err <= 1e-6 && r_err <= 1e-9 && all_exact && degenerate_ok && ties_ok &&
                    t_cases >= 20 && r_cases >= 20;
  return {pass, std::to_string(t_cases) + " t-test fixtures (max t err " + fmt("%.2g, p err %.2g), ", t_err, p_err) +
                    std::to_string(r_cases) + " rank-sum fixtures (max p err " + fmt("%.2g)", r_err) +
                    (degenerate_ok && ties_ok ? ", degenerate cases ok" : ", degenerate cases wrong")};
}

bool plan_ok(const Dataset& d, const FoldPlan& plan) {
  if (plan.pairs.size() != 10) return false;
  for (std::size_t k = 0; k < 10; ++k) {
    const FoldPair& p = plan.pairs[k];
    std::vector<std::size_t> all = p.train;
    all.insert(all.end(), p.valid.begin(), p.valid.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i] != i) return false;
    }
    if (all.size() != d.rows) return false;
    const FoldPair& twin = plan.pairs[k ^ 1];
    if (p.train != twin.valid || p.valid != twin.train) return false;
  }
  return true;
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  const std::string args = "benchmark --synth ring --n 300 --seed 9 --epochs 5 --grid 'lr=0.1,0.5;lambda=0,0.001' "
                           "--models hard,budding,distributed --out ";
  const CliRun a = cli(args + (dir / "a").string());
  const CliRun b = cli(args + (dir / "b").string());
  const std::string ja = slurp(dir / "a" / "report.json");
  const bool identical = a.code == 0 && b.code == 0 && !ja.empty() && ja == slurp(dir / "b" / "report.json");
  fs::remove_all(dir);

  int plans = 0;
  bool folds = true;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (const char* name : {"xor", "ring", "two_gaussians"}) {
      const Dataset d = synth(name, 50 + 7 * seed, seed);
      folds = folds && plan_ok(d, cv_5x2(d, seed));
      ++plans;
    }
    Dataset r = smooth_regression(41 + seed, seed);
    folds = folds && plan_ok(r, cv_5x2(r, seed));
    ++plans;
  }
  return {identical && folds, std::string("report.json ") + (identical ? "byte-identical" : "differs") + ", " +
                                  std::to_string(plans) + " fold plans " +
                                  (folds ? "partition and swap hold" : "violate partition or swap")};
}

Dataset rectangles(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.task = Task::binary;
  d.dim = 3;
  d.rows = n;
  d.class_names = {"out", "in"};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    const double c = u(rng);
    d.features.insert(d.features.end(), {a, b, c});
    d.labels.push_back((a > 0.3 && a < 0.7 && b > 0.2) || (a > 0.85 && c < 0.25) ? 1 : 0);
  }
  return d;
}

Dataset quadrants(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d;
  d.task = Task::multiclass;
  d.dim = 2;
  d.rows = n;
  d.class_names = {"a", "b", "c"};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    d.features.insert(d.features.end(), {a, b});
    d.labels.push_back(a < -0.2 ? 0 : (b < 0.4 ? 1 : 2));
  }
  return d;
}

Outcome hard_baseline() {
  int fixtures = 0;
  int perfect = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const Dataset& d : {rectangles(400, seed), quadrants(300, seed)}) {
      const HardTree t = grow_hard_unpruned(d);
      perfect += metric(predict_scores(t, d), d) == 100.0;
      ++fixtures;
    }
  }
  int prunes = 0;
  int degraded = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const char* name : {"ring", "xor", "two_gaussians"}) {
      const Dataset train = synth(name, 300, seed);
      const Dataset valid = synth(name, 150, seed + 1000);
      const HardTree full = grow_hard_unpruned(train);
      const HardTree pruned = prune_hard(full, valid);
      degraded += metric(predict_scores(pruned, valid), valid) < metric(predict_scores(full, valid), valid) ||
                  tree_size(pruned) > tree_size(full);
      ++prunes;
    }
  }
  return {perfect == fixtures && degraded == 0,
          std::to_string(perfect) + "/" + std::to_string(fixtures) + " separable fixtures fit exactly, " +
              std::to_string(degraded) + "/" + std::to_string(prunes) + " prunes degraded validation"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_oracle}, {2, reduction_identity}, {3, conversion_equivalence}, {4, locality},
      {5, xor_check},       {6, ring_ordering},      {7, pruning_fidelity},       {8, statistics},
      {9, determinism},     {10, hard_baseline},
  };
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
