#include "softgrove/random_tree.hpp"

namespace softgrove {

namespace {

void fill_node(SoftNode& node, TreeKind kind, int depth, int input_dim, int output_dim,
               const RandomTreeOptions& opt, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto width = static_cast<std::size_t>(input_dim) + 1;
  node.w.resize(width);
  for (double& x : node.w) x = opt.weight_scale * normal(rng);
  if (kind == TreeKind::distributed) {
    node.v.resize(width);
    for (double& x : node.v) x = opt.weight_scale * normal(rng);
  }
  node.rho.resize(static_cast<std::size_t>(output_dim));
  for (double& x : node.rho) x = opt.response_scale * normal(rng);

  const bool split = depth < opt.depth && (depth == 0 || unit(rng) < opt.split_probability);
  if (!split) {
    node.gamma = opt.unit_leaf_gamma || kind == TreeKind::soft ? 1.0 : unit(rng);
    return;
  }
  node.gamma = kind == TreeKind::soft ? 0.0 : unit(rng);
  node.left = std::make_unique<SoftNode>();
  node.right = std::make_unique<SoftNode>();
  fill_node(*node.left, kind, depth + 1, input_dim, output_dim, opt, rng);
  fill_node(*node.right, kind, depth + 1, input_dim, output_dim, opt, rng);
}

}  // namespace

SoftTree random_tree(TreeKind kind, Task task, int input_dim, int output_dim,
                     const RandomTreeOptions& options, std::mt19937_64& rng) {
  SoftTree t;
  t.kind = kind;
  t.task = task;
  t.input_dim = input_dim;
  t.output_dim = output_dim;
  fill_node(t.root, kind, 0, input_dim, output_dim, options, rng);
  return t;
}

Dataset random_dataset(Task task, std::size_t rows, std::size_t dim, int output_dim,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.task = task;
  d.rows = rows;
  d.dim = dim;
  d.features.resize(rows * dim);
  for (double& x : d.features) x = normal(rng);
  for (std::size_t j = 0; j < dim; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  if (task == Task::regression) {
    d.target_dim = static_cast<std::size_t>(output_dim);
    d.targets.resize(rows * d.target_dim);
    for (double& t : d.targets) t = normal(rng);
    return d;
  }
  const int classes = task == Task::binary ? 2 : output_dim;
  for (int c = 0; c < classes; ++c) d.class_names.push_back(std::to_string(c));
  std::uniform_int_distribution<int> pick(0, classes - 1);
  d.labels.resize(rows);
  for (int& l : d.labels) l = pick(rng);
  return d;
}

}  // namespace softgrove
