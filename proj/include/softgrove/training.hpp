#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "softgrove/data.hpp"
#include "softgrove/gradients.hpp"
#include "softgrove/tree.hpp"

namespace softgrove {

struct TrainConfig {
  double learning_rate = 0.1;
  double lambda = 0.0;
  int epochs = 100;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double growth_threshold = 1e-2;  // a childless node splits once gamma < 1 - this
  double init_scale = 1e-2;        // new gate weights ~ U[-init_scale, init_scale]
  double prune_eps = 1e-2;
  int max_depth = 8;               // no growth below this depth (root = 0)

  void check() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_metric = 0.0;
  std::size_t size = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // epoch,train_loss,valid_metric,size
  std::string to_csv() const;
};

struct FitResult {
  SoftTree tree;
  TrainHistory history;
  int best_epoch = 0;  // 0 = the initial bud
  double best_valid_metric = 0.0;
};

// Raw responses (N x K, row-major) of a tree on every row of `data`.
std::vector<double> predict_raw(const SoftTree& tree, const Dataset& data);

// Single bud with the response a constant model would fit: mean target for
// regression, prior log-odds / log-priors for classification.
SoftTree initial_bud(TreeKind kind, const Dataset& train);

// Plain minibatch SGD with growth. budding/distributed start from a single
// bud and grow; `soft` trains one fixed soft gate over two leaves (a linear
// probe) with gamma frozen and no growth. Returns the best-validation
// snapshot, pruned with config.prune_eps.
FitResult sgd_fit(TreeKind kind, const Dataset& train, const Dataset& valid,
                  const TrainConfig& config);

// Applies theta -= lr * grad and clamps gamma to [0,1].
void apply_update(SoftTree& tree, const ParamGrads& grads, double learning_rate,
                  bool update_gamma = true);

// Attaches two gamma = 1 children (parent's rho, small random gates) to every
// childless node with gamma < 1 - growth_threshold above max_depth.
// Returns the number of nodes that were split.
std::size_t grow_step(SoftTree& tree, const TrainConfig& config, std::mt19937_64& rng);

struct GridPoint {
  double learning_rate = 0.1;
  double lambda = 0.0;
};

struct TuneResult {
  std::size_t best = 0;
  std::vector<GridPoint> grid;
  std::vector<double> mean_metric;                 // per grid point
  std::vector<std::vector<double>> fold_metric;    // [grid][fold]
  std::vector<std::vector<SoftTree>> models;       // [grid][fold]
};

// Seed for one (fold, grid point) run derived from the base seed.
std::uint64_t derive_seed(std::uint64_t base, std::size_t fold, std::size_t grid_index);

// Trains every grid point on every fold (train half) and scores it on the
// fold's validation half. The best mean wins; ties go to the earlier point.
TuneResult tune(TreeKind kind, const Dataset& trainval, const std::vector<GridPoint>& grid,
                const TrainConfig& config, const FoldPlan& folds);

// Greedy univariate induction without pruning: exhaustive attribute and
// midpoint-threshold search minimizing weighted child impurity (entropy or
// variance); stops on no improvement or fewer than 5 samples.
HardTree grow_hard_unpruned(const Dataset& train);

// Reduced-error pruning on `valid`, bottom-up, repeated to a fixed point.
HardTree prune_hard(const HardTree& tree, const Dataset& valid);

HardTree grow_hard(const Dataset& train, const Dataset& valid);

// Scores comparable to predict_raw for metric(): the leaf response, except
// binary trees where p - 0.5 is returned so that the sign decides.
std::vector<double> predict_scores(const HardTree& tree, const Dataset& data);

}  // namespace softgrove
