#pragma once

#include <cstddef>
#include <random>

#include "softgrove/data.hpp"
#include "softgrove/tree.hpp"

namespace softgrove {

struct RandomTreeOptions {
  int depth = 3;
  // Probability that a node above `depth` splits; the root always splits
  // when depth > 0.
  double split_probability = 0.7;
  double weight_scale = 1.0;
  double response_scale = 1.0;
  // Leaves get gamma = 1 when set, otherwise a random gamma in [0,1].
  bool unit_leaf_gamma = true;
};

// Random tree with the invariants of `kind` (soft: internal gamma 0, leaves 1).
SoftTree random_tree(TreeKind kind, Task task, int input_dim, int output_dim,
                     const RandomTreeOptions& options, std::mt19937_64& rng);

// Standard-normal features; targets or labels drawn uniformly.
Dataset random_dataset(Task task, std::size_t rows, std::size_t dim, int output_dim,
                       std::mt19937_64& rng);

}  // namespace softgrove
