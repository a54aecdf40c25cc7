#include "softgrove/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "softgrove/errors.hpp"
#include "softgrove/parallel.hpp"
#include "softgrove/stats.hpp"

namespace softgrove {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool improves(double candidate, double incumbent, bool higher_better) {
  return higher_better ? candidate > incumbent : candidate < incumbent;
}

std::vector<double> random_weights(std::size_t n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> w(n);
  for (double& x : w) x = u(rng);
  return w;
}

std::size_t grow_node(SoftNode& node, int depth, TreeKind kind, const TrainConfig& config,
                      std::size_t width, std::mt19937_64& rng) {
  if (node.has_children()) {
    return grow_node(*node.left, depth + 1, kind, config, width, rng) +
           grow_node(*node.right, depth + 1, kind, config, width, rng);
  }
  if (node.gamma >= 1.0 - config.growth_threshold || depth >= config.max_depth) return 0;
  for (auto* slot : {&node.left, &node.right}) {
    auto child = std::make_unique<SoftNode>();
    child->gamma = 1.0;
    child->rho = node.rho;
    child->w = random_weights(width, config.init_scale, rng);
    if (kind == TreeKind::distributed) child->v = random_weights(width, config.init_scale, rng);
    *slot = std::move(child);
  }
  return 1;
}

// Linear probe: one soft gate over two leaves.
SoftTree soft_probe(const Dataset& train, const TrainConfig& config, std::mt19937_64& rng) {
  SoftTree t = initial_bud(TreeKind::soft, train);
  const std::size_t width = train.dim + 1;
  t.root.gamma = 0.0;
  t.root.w = random_weights(width, std::max(config.init_scale, 1e-3), rng);
  for (auto* slot : {&t.root.left, &t.root.right}) {
    auto leaf = std::make_unique<SoftNode>();
    leaf->gamma = 1.0;
    leaf->rho = t.root.rho;
    leaf->w.assign(width, 0.0);
    *slot = std::move(leaf);
  }
  return t;
}

// --- hard tree induction ---------------------------------------------------

struct ImpurityAcc {
  Task task;
  std::size_t width;
  double n = 0.0;
  std::vector<double> sum;     // class counts or target sums
  std::vector<double> sumsq;   // regression only

  ImpurityAcc(Task t, std::size_t w) : task(t), width(w), sum(w, 0.0), sumsq(w, 0.0) {}

  void add(const Dataset& d, std::size_t i, double sign = 1.0) {
    n += sign;
    if (task == Task::regression) {
      const auto t = d.target(i);
      for (std::size_t k = 0; k < width; ++k) {
        sum[k] += sign * t[k];
        sumsq[k] += sign * t[k] * t[k];
      }
    } else {
      sum[static_cast<std::size_t>(d.labels[i])] += sign;
    }
  }

  // Impurity times sample count (entropy in nats, or summed variance).
  double weighted() const {
    if (n <= 0.0) return 0.0;
    double out = 0.0;
    if (task == Task::regression) {
      for (std::size_t k = 0; k < width; ++k) out += std::max(0.0, sumsq[k] - sum[k] * sum[k] / n);
      return out;
    }
    for (const double c : sum) {
      if (c > 0.0) out -= c * std::log(c / n);
    }
    return out;
  }
};

std::vector<double> leaf_response(const Dataset& d, std::span<const std::size_t> idx) {
  if (d.task == Task::regression) {
    std::vector<double> m(d.target_dim, 0.0);
    for (const std::size_t i : idx) {
      const auto t = d.target(i);
      for (std::size_t k = 0; k < d.target_dim; ++k) m[k] += t[k];
    }
    for (double& v : m) v /= static_cast<double>(idx.size());
    return m;
  }
  std::vector<double> counts(std::max<std::size_t>(d.num_classes(), 2), 0.0);
  for (const std::size_t i : idx) counts[static_cast<std::size_t>(d.labels[i])] += 1.0;
  for (double& v : counts) v /= static_cast<double>(idx.size());
  if (d.task == Task::binary) return {counts[1]};
  return counts;
}

std::size_t class_width(const Dataset& d) {
  return d.task == Task::regression ? d.target_dim : std::max<std::size_t>(d.num_classes(), 2);
}

void grow_hard_node(HardNode& node, const Dataset& d, std::vector<std::size_t> idx) {
  node.rho = leaf_response(d, idx);
  node.attr = 0;
  if (idx.size() < 5) return;

  const std::size_t width = class_width(d);
  ImpurityAcc all(d.task, width);
  for (const std::size_t i : idx) all.add(d, i);
  const double parent = all.weighted();
  if (parent <= 1e-12) return;

  double best = parent - 1e-12 * std::max(1.0, parent);
  int best_attr = 0;
  double best_threshold = 0.0;
  std::vector<std::size_t> order = idx;
  for (std::size_t j = 0; j < d.dim; ++j) {
    auto value = [&](std::size_t i) { return d.features[i * d.dim + j]; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return value(a) < value(b) || (value(a) == value(b) && a < b);
    });
    ImpurityAcc low(d.task, width);
    ImpurityAcc high = all;
    for (std::size_t p = 0; p + 1 < order.size(); ++p) {
      low.add(d, order[p]);
      high.add(d, order[p], -1.0);
      const double a = value(order[p]);
      const double b = value(order[p + 1]);
      if (!(a < b)) continue;
      const double score = low.weighted() + high.weighted();
      if (score < best) {
        best = score;
        best_attr = static_cast<int>(j) + 1;
        best_threshold = 0.5 * (a + b);
        if (!(best_threshold > a && best_threshold < b)) best_threshold = a;
      }
    }
  }
  if (best_attr == 0) return;

  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  const auto col = static_cast<std::size_t>(best_attr - 1);
  for (const std::size_t i : idx) {
    (d.features[i * d.dim + col] - best_threshold > 0.0 ? left : right).push_back(i);
  }
  node.attr = best_attr;
  node.threshold = best_threshold;
  node.left = std::make_unique<HardNode>();
  node.right = std::make_unique<HardNode>();
  idx.clear();
  idx.shrink_to_fit();
  grow_hard_node(*node.left, d, std::move(left));
  grow_hard_node(*node.right, d, std::move(right));
}

// Error to minimize: 100 - accuracy or 100 x MSE.
double hard_error(const HardTree& tree, const Dataset& valid) {
  const double m = metric(predict_scores(tree, valid), valid);
  return higher_is_better(valid.task) ? 100.0 - m : m;
}

bool prune_pass(HardTree& tree, HardNode& node, const Dataset& valid, double& current) {
  if (node.is_leaf()) return false;
  bool changed = prune_pass(tree, *node.left, valid, current);
  changed |= prune_pass(tree, *node.right, valid, current);

  auto left = std::move(node.left);
  auto right = std::move(node.right);
  const int attr = node.attr;
  node.attr = 0;
  const double collapsed = hard_error(tree, valid);
  if (collapsed <= current + 1e-12) {
    current = collapsed;
    return true;
  }
  node.attr = attr;
  node.left = std::move(left);
  node.right = std::move(right);
  return changed;
}

}  // namespace

void TrainConfig::check() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be a nonnegative number");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be nonnegative");
  if (epochs < 1) throw std::invalid_argument("epochs must be a positive integer");
  if (batch_size < 1) throw std::invalid_argument("batch size must be a positive integer");
  if (!(growth_threshold > 0.0 && growth_threshold < 1.0)) {
    throw std::invalid_argument("growth threshold must lie in (0,1)");
  }
  if (!(init_scale > 0.0)) throw std::invalid_argument("init scale must be positive");
  if (!(prune_eps >= 0.0 && prune_eps < 1.0)) throw std::invalid_argument("prune eps must lie in [0,1)");
  if (max_depth < 0) throw std::invalid_argument("max depth must be nonnegative");
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,valid_metric,size\n";
  char buf[128];
  for (const EpochRecord& r : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%zu\n", r.epoch, r.train_loss, r.valid_metric, r.size);
    out += buf;
  }
  return out;
}

std::vector<double> predict_raw(const SoftTree& tree, const Dataset& data) {
  if (data.dim != static_cast<std::size_t>(tree.input_dim)) {
    throw DataError("dataset has " + std::to_string(data.dim) + " features, model expects " +
                    std::to_string(tree.input_dim));
  }
  const auto K = static_cast<std::size_t>(tree.output_dim);
  std::vector<double> out(data.rows * K);
  std::vector<double> x(data.dim + 1);
  for (std::size_t i = 0; i < data.rows; ++i) {
    data.augmented(i, x);
    const auto y = evaluate(tree, x);
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(i * K));
  }
  return out;
}

SoftTree initial_bud(TreeKind kind, const Dataset& train) {
  if (train.rows == 0) throw std::invalid_argument("empty training set");
  std::vector<double> rho;
  const auto n = static_cast<double>(train.rows);
  if (train.task == Task::regression) {
    rho.assign(train.target_dim, 0.0);
    for (std::size_t i = 0; i < train.rows; ++i) {
      const auto t = train.target(i);
      for (std::size_t k = 0; k < train.target_dim; ++k) rho[k] += t[k];
    }
    for (double& v : rho) v /= n;
  } else {
    const std::size_t K = std::max<std::size_t>(train.num_classes(), 2);
    std::vector<double> counts(K, 0.0);
    for (const int l : train.labels) counts[static_cast<std::size_t>(l)] += 1.0;
    // Add-one smoothing keeps the log-odds finite.
    if (train.task == Task::binary) {
      rho = {std::log((counts[1] + 1.0) / (counts[0] + 1.0))};
    } else {
      for (const double c : counts) rho.push_back(std::log((c + 1.0) / (n + static_cast<double>(K))));
    }
  }
  return make_bud(kind, train.task, static_cast<int>(train.dim), std::move(rho));
}

void apply_update(SoftTree& tree, const ParamGrads& grads, double learning_rate, bool update_gamma) {
  const auto nodes = preorder(tree);
  if (nodes.size() != grads.nodes.size()) throw std::invalid_argument("gradients do not match the tree");
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    SoftNode& node = *nodes[m];
    const NodeGrads& g = grads.nodes[m];
    for (std::size_t k = 0; k < node.rho.size(); ++k) node.rho[k] -= learning_rate * g.d_rho[k];
    for (std::size_t j = 0; j < node.w.size(); ++j) node.w[j] -= learning_rate * g.d_w[j];
    for (std::size_t j = 0; j < node.v.size(); ++j) node.v[j] -= learning_rate * g.d_v[j];
    if (update_gamma) node.gamma = std::clamp(node.gamma - learning_rate * g.d_gamma, 0.0, 1.0);
  }
}

std::size_t grow_step(SoftTree& tree, const TrainConfig& config, std::mt19937_64& rng) {
  return grow_node(tree.root, 0, tree.kind, config, static_cast<std::size_t>(tree.input_dim) + 1, rng);
}

FitResult sgd_fit(TreeKind kind, const Dataset& train, const Dataset& valid, const TrainConfig& config) {
  config.check();
  if (train.rows == 0) throw std::invalid_argument("empty training set");
  if (valid.rows == 0) throw std::invalid_argument("empty validation set");
  if (train.dim != valid.dim || train.task != valid.task || train.output_dim() != valid.output_dim()) {
    throw std::invalid_argument("training and validation sets differ in shape or task");
  }
  std::mt19937_64 rng(config.seed);
  const bool probe = kind == TreeKind::soft;
  SoftTree tree = probe ? soft_probe(train, config, rng) : initial_bud(kind, train);
  const LossSpec spec = LossSpec::for_task(train.task, config.lambda);
  const bool higher_better = higher_is_better(train.task);

  FitResult result;
  result.tree = tree;
  result.best_valid_metric = metric(predict_raw(tree, valid), valid);

  std::vector<std::size_t> order(train.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      double loss = 0.0;
      const ParamGrads grads = backward(tree, train, spec, rows, &loss);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) in epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += loss * static_cast<double>(len);
      apply_update(tree, grads, config.learning_rate, !probe);
      if (!probe) grow_step(tree, config, rng);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.rows);
    rec.valid_metric = metric(predict_raw(tree, valid), valid);
    rec.size = tree_size(tree);
    if (!std::isfinite(rec.valid_metric)) {
      throw TrainingError("training diverged (non-finite validation metric) in epoch " + std::to_string(epoch),
                          epoch);
    }
    result.history.epochs.push_back(rec);
    if (improves(rec.valid_metric, result.best_valid_metric, higher_better)) {
      result.best_valid_metric = rec.valid_metric;
      result.best_epoch = epoch;
      result.tree = tree;
    }
  }
  if (!probe) prune_in_place(result.tree, config.prune_eps);
  return result;
}

std::uint64_t derive_seed(std::uint64_t base, std::size_t fold, std::size_t grid_index) {
  return base ^ splitmix64(0x5f0d000000000000ULL + fold) ^ splitmix64(0x6a1d000000000000ULL + grid_index);
}

TuneResult tune(TreeKind kind, const Dataset& trainval, const std::vector<GridPoint>& grid,
                const TrainConfig& config, const FoldPlan& folds) {
  if (grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
  if (folds.pairs.empty()) throw std::invalid_argument("empty fold plan");
  const std::size_t nf = folds.pairs.size();
  TuneResult out;
  out.grid = grid;
  out.fold_metric.assign(grid.size(), std::vector<double>(nf, 0.0));
  out.models.assign(grid.size(), std::vector<SoftTree>(nf));

  std::vector<Dataset> train_sets(nf);
  std::vector<Dataset> valid_sets(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    train_sets[f] = trainval.subset(folds.pairs[f].train);
    valid_sets[f] = trainval.subset(folds.pairs[f].valid);
  }
  parallel_for(grid.size() * nf, [&](std::size_t job) {
    const std::size_t g = job / nf;
    const std::size_t f = job % nf;
    TrainConfig c = config;
    c.learning_rate = grid[g].learning_rate;
    c.lambda = grid[g].lambda;
    c.seed = derive_seed(config.seed, f, g);
    FitResult fit = sgd_fit(kind, train_sets[f], valid_sets[f], c);
    out.fold_metric[g][f] = metric(predict_raw(fit.tree, valid_sets[f]), valid_sets[f]);
    out.models[g][f] = std::move(fit.tree);
  });

  const bool higher_better = higher_is_better(trainval.task);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.mean_metric.push_back(mean(out.fold_metric[g]));
    if (g > 0 && improves(out.mean_metric[g], out.mean_metric[out.best], higher_better)) out.best = g;
  }
  return out;
}

HardTree grow_hard_unpruned(const Dataset& train) {
  if (train.rows == 0) throw std::invalid_argument("empty training set");
  HardTree tree;
  tree.input_dim = static_cast<int>(train.dim);
  tree.task = train.task;
  tree.output_dim = train.task == Task::binary ? 1 : static_cast<int>(class_width(train));
  std::vector<std::size_t> idx(train.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  grow_hard_node(tree.root, train, std::move(idx));
  return tree;
}

HardTree prune_hard(const HardTree& tree, const Dataset& valid) {
  if (valid.rows == 0) throw std::invalid_argument("empty validation set");
  HardTree out = tree;
  double current = hard_error(out, valid);
  while (prune_pass(out, out.root, valid, current)) {
  }
  return out;
}

HardTree grow_hard(const Dataset& train, const Dataset& valid) {
  return prune_hard(grow_hard_unpruned(train), valid);
}

std::vector<double> predict_scores(const HardTree& tree, const Dataset& data) {
  if (data.dim != static_cast<std::size_t>(tree.input_dim)) {
    throw DataError("dataset has " + std::to_string(data.dim) + " features, model expects " +
                    std::to_string(tree.input_dim));
  }
  const auto K = static_cast<std::size_t>(tree.output_dim);
  std::vector<double> out(data.rows * K);
  std::vector<double> x(data.dim + 1);
  for (std::size_t i = 0; i < data.rows; ++i) {
    data.augmented(i, x);
    auto y = eval_hard(tree, x);
    if (tree.task == Task::binary) y[0] -= 0.5;
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(i * K));
  }
  return out;
}

}  // namespace softgrove
