#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "softgrove/tree.hpp"

namespace fixtures {

using softgrove::SoftNode;
using softgrove::SoftTree;
using softgrove::TreeKind;

inline std::unique_ptr<SoftNode> leaf(double rho, int width, bool with_v = false) {
  auto n = std::make_unique<SoftNode>();
  n->gamma = 1.0;
  n->w.assign(width, 0.0);
  if (with_v) n->v.assign(width, 0.0);
  n->rho = {rho};
  return n;
}

// Depth-1 tree with scalar responses.
inline SoftTree stump(TreeKind kind, double gamma, double rho_root, double rho_left, double rho_right,
                      int input_dim = 1) {
  const int width = input_dim + 1;
  const bool with_v = kind == TreeKind::distributed;
  SoftTree t;
  t.kind = kind;
  t.input_dim = input_dim;
  t.output_dim = 1;
  t.root.gamma = gamma;
  t.root.w.assign(width, 0.0);
  if (with_v) t.root.v.assign(width, 0.0);
  t.root.rho = {rho_root};
  t.root.left = leaf(rho_left, width, with_v);
  t.root.right = leaf(rho_right, width, with_v);
  return t;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double dot(const std::vector<double>& a, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
  return s;
}

// Straight transcription of the recursive response, absent subtrees count as zero.
inline std::vector<double> naive(const SoftNode& n, const std::vector<double>& x, bool distributed) {
  std::vector<double> y(n.rho.size());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = n.gamma * n.rho[k];
  if (n.gamma == 1.0 || !n.left) return y;
  const double g = logistic(dot(n.w, x));
  const double h = distributed ? logistic(dot(n.v, x)) : 1.0 - g;
  const auto l = naive(*n.left, x, distributed);
  const auto r = naive(*n.right, x, distributed);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += (1.0 - n.gamma) * (g * l[k] + h * r[k]);
  return y;
}

inline std::vector<double> naive(const SoftTree& t, const std::vector<double>& x) {
  return naive(t.root, x, t.kind == TreeKind::distributed);
}

inline std::vector<double> random_input(int dim, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> x(dim + 1);
  x[0] = 1.0;
  for (int j = 1; j <= dim; ++j) x[j] = normal(rng);
  return x;
}

}  // namespace fixtures
