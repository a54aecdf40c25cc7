#include "softgrove/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "softgrove/errors.hpp"

namespace softgrove {

namespace {

double softplus(double z) noexcept {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double log_sum_exp(std::span<const double> z) noexcept {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (const double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

void check_batch(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                 std::span<const std::size_t> rows) {
  spec.check();
  if (batch.rows == 0 || (rows.empty() && batch.rows == 0)) {
    throw std::invalid_argument("empty batch");
  }
  if (batch.dim != static_cast<std::size_t>(tree.input_dim)) {
    throw std::invalid_argument("batch has " + std::to_string(batch.dim) +
                                " features, tree expects " + std::to_string(tree.input_dim));
  }
  if (batch.task != spec.task || tree.task != spec.task) {
    throw std::invalid_argument("task mismatch between tree, batch and loss");
  }
  if (batch.output_dim() != tree.output_dim) {
    throw std::invalid_argument("batch output width does not match the tree");
  }
  auto check_row = [&](std::size_t i) {
    if (i >= batch.rows) throw std::out_of_range("batch row index out of range");
    for (const double v : batch.row(i)) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature in batch");
    }
    if (spec.task == Task::regression) {
      for (const double v : batch.target(i)) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite target in batch");
      }
    }
  };
  if (rows.empty()) {
    for (std::size_t i = 0; i < batch.rows; ++i) check_row(i);
  } else {
    for (const std::size_t i : rows) check_row(i);
  }
}

// Data loss of one sample; when `grad` is non-empty it receives dL/dy.
double sample_loss(const LossSpec& spec, const Dataset& batch, std::size_t i,
                   std::span<const double> y, std::span<double> grad) {
  switch (spec.task) {
    case Task::regression: {
      const auto t = batch.target(i);
      double loss = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) {
        const double r = y[k] - t[k];
        loss += 0.5 * r * r;
        if (!grad.empty()) grad[k] = r;
      }
      return loss;
    }
    case Task::binary: {
      const double t = batch.labels[i] == 1 ? 1.0 : 0.0;
      if (!grad.empty()) grad[0] = sigmoid(y[0]) - t;
      return softplus(y[0]) - t * y[0];
    }
    case Task::multiclass: {
      const auto label = static_cast<std::size_t>(batch.labels[i]);
      const double lse = log_sum_exp(y);
      if (!grad.empty()) {
        for (std::size_t k = 0; k < y.size(); ++k) {
          grad[k] = std::exp(y[k] - lse) - (k == label ? 1.0 : 0.0);
        }
      }
      return lse - y[label];
    }
  }
  return 0.0;
}

double penalty(const SoftTree& tree, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (const SoftNode* n : preorder(tree)) s += 1.0 - n->gamma;
  return lambda * s;
}

// Preorder arrays; children always sit after their parent.
struct FlatTree {
  std::vector<const SoftNode*> node;
  std::vector<int> left;
  std::vector<int> right;

  explicit FlatTree(const SoftTree& tree) { add(tree.root); }

  int add(const SoftNode& n) {
    const int idx = static_cast<int>(node.size());
    node.push_back(&n);
    left.push_back(-1);
    right.push_back(-1);
    if (n.left || n.right) {
      if (!n.has_children()) throw StructuralError("internal node is missing a child");
      const int l = add(*n.left);
      const int r = add(*n.right);
      left[static_cast<std::size_t>(idx)] = l;
      right[static_cast<std::size_t>(idx)] = r;
    }
    return idx;
  }
};

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Link link_for(Task task) noexcept {
  switch (task) {
    case Task::regression: return Link::identity;
    case Task::binary: return Link::logistic;
    case Task::multiclass: return Link::softmax;
  }
  return Link::identity;
}

LossSpec LossSpec::for_task(Task task, double lambda) {
  LossSpec s{task, link_for(task), lambda};
  s.check();
  return s;
}

void LossSpec::check() const {
  if (link != link_for(task)) throw std::invalid_argument("link function does not match the task");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
}

void apply_link(Link link, std::span<double> response) {
  switch (link) {
    case Link::identity: return;
    case Link::logistic:
      for (double& v : response) v = sigmoid(v);
      return;
    case Link::softmax: {
      const double lse = log_sum_exp(response);
      for (double& v : response) v = std::exp(v - lse);
      return;
    }
  }
}

std::vector<double> ParamGrads::flatten() const {
  std::vector<double> out;
  for (const NodeGrads& n : nodes) {
    out.push_back(n.d_gamma);
    out.insert(out.end(), n.d_w.begin(), n.d_w.end());
    out.insert(out.end(), n.d_v.begin(), n.d_v.end());
    out.insert(out.end(), n.d_rho.begin(), n.d_rho.end());
  }
  return out;
}

std::vector<std::string> ParamGrads::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string prefix = "node" + std::to_string(i) + ".";
    out.push_back(prefix + "gamma");
    for (std::size_t j = 0; j < nodes[i].d_w.size(); ++j) out.push_back(prefix + "w[" + std::to_string(j) + "]");
    for (std::size_t j = 0; j < nodes[i].d_v.size(); ++j) out.push_back(prefix + "v[" + std::to_string(j) + "]");
    for (std::size_t j = 0; j < nodes[i].d_rho.size(); ++j) out.push_back(prefix + "rho[" + std::to_string(j) + "]");
  }
  return out;
}

ParamGrads zeros_like(const SoftTree& tree) {
  ParamGrads g;
  for (const SoftNode* n : preorder(tree)) {
    NodeGrads ng;
    ng.d_w.assign(n->w.size(), 0.0);
    ng.d_v.assign(n->v.size(), 0.0);
    ng.d_rho.assign(n->rho.size(), 0.0);
    g.nodes.push_back(std::move(ng));
  }
  return g;
}

double forward_loss(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                    std::span<const std::size_t> rows) {
  check_batch(tree, batch, spec, rows);
  std::vector<double> x(batch.dim + 1);
  double total = 0.0;
  auto add = [&](std::size_t i) {
    batch.augmented(i, x);
    const auto y = evaluate(tree, x);
    total += sample_loss(spec, batch, i, y, {});
  };
  std::size_t count = 0;
  if (rows.empty()) {
    for (std::size_t i = 0; i < batch.rows; ++i) add(i);
    count = batch.rows;
  } else {
    for (const std::size_t i : rows) add(i);
    count = rows.size();
  }
  return total / static_cast<double>(count) + penalty(tree, spec.lambda);
}

ParamGrads backward(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                    std::span<const std::size_t> rows, double* loss_out) {
  if (tree.hardened()) throw ContractError("backward called on a hardened tree");
  check_batch(tree, batch, spec, rows);
  const FlatTree flat(tree);
  const std::size_t n = flat.node.size();
  const auto K = static_cast<std::size_t>(tree.output_dim);
  const std::size_t width = batch.dim + 1;
  const bool untied = tree.kind == TreeKind::distributed;

  ParamGrads grads = zeros_like(tree);
  std::vector<double> x(width);
  std::vector<double> y(n * K);
  std::vector<double> delta(n * K);
  std::vector<double> g(n);
  std::vector<double> h(n);

  const std::size_t count = rows.empty() ? batch.rows : rows.size();
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;

  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t i = rows.empty() ? s : rows[s];
    batch.augmented(i, x);

    // Forward, children before parents.
    for (std::size_t m = n; m-- > 0;) {
      const SoftNode& node = *flat.node[m];
      double* ym = &y[m * K];
      for (std::size_t k = 0; k < K; ++k) ym[k] = node.gamma * node.rho[k];
      if (flat.left[m] < 0) continue;
      if (untied && node.v.size() != width) {
        throw StructuralError("distributed node is missing its right-gate weights");
      }
      g[m] = sigmoid(dot(node.w, x));
      h[m] = untied ? sigmoid(dot(node.v, x)) : 1.0 - g[m];
      const double* yl = &y[static_cast<std::size_t>(flat.left[m]) * K];
      const double* yr = &y[static_cast<std::size_t>(flat.right[m]) * K];
      const double inner = 1.0 - node.gamma;
      for (std::size_t k = 0; k < K; ++k) ym[k] += inner * (g[m] * yl[k] + h[m] * yr[k]);
    }

    total += sample_loss(spec, batch, i, std::span<const double>(y.data(), K),
                         std::span<double>(delta.data(), K));
    for (std::size_t k = 0; k < K; ++k) delta[k] *= inv;

    // Backward, parents before children.
    for (std::size_t m = 0; m < n; ++m) {
      const SoftNode& node = *flat.node[m];
      NodeGrads& ng = grads.nodes[m];
      const double* dm = &delta[m * K];
      for (std::size_t k = 0; k < K; ++k) ng.d_rho[k] += node.gamma * dm[k];
      if (flat.left[m] < 0) {
        ng.d_gamma += dot(std::span<const double>(dm, K), node.rho);
        continue;
      }
      const auto l = static_cast<std::size_t>(flat.left[m]);
      const auto r = static_cast<std::size_t>(flat.right[m]);
      const double* yl = &y[l * K];
      const double* yr = &y[r * K];
      const double inner = 1.0 - node.gamma;
      double d_gamma = 0.0;
      double a = 0.0;  // dL/dg
      double b = 0.0;  // dL/dh
      for (std::size_t k = 0; k < K; ++k) {
        d_gamma += dm[k] * (node.rho[k] - (g[m] * yl[k] + h[m] * yr[k]));
        a += dm[k] * yl[k];
        b += dm[k] * yr[k];
        delta[l * K + k] = inner * g[m] * dm[k];
        delta[r * K + k] = inner * h[m] * dm[k];
      }
      ng.d_gamma += d_gamma;
      a *= inner;
      b *= inner;
      if (untied) {
        const double dzw = a * g[m] * (1.0 - g[m]);
        const double dzv = b * h[m] * (1.0 - h[m]);
        for (std::size_t j = 0; j < width; ++j) {
          ng.d_w[j] += dzw * x[j];
          ng.d_v[j] += dzv * x[j];
        }
      } else {
        const double dz = (a - b) * g[m] * (1.0 - g[m]);
        for (std::size_t j = 0; j < width; ++j) ng.d_w[j] += dz * x[j];
      }
    }
  }

  if (spec.lambda != 0.0) {
    for (NodeGrads& ng : grads.nodes) ng.d_gamma -= spec.lambda;
  }
  if (loss_out) *loss_out = total * inv + penalty(tree, spec.lambda);
  return grads;
}

ParamGrads finite_diff_grads(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                             double step, std::span<const std::size_t> rows) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  SoftTree probe = tree;
  ParamGrads grads = zeros_like(tree);
  const auto nodes = preorder(probe);
  auto loss = [&] { return forward_loss(probe, batch, spec, rows); };
  auto central = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = loss();
    param = saved - step;
    const double down = loss();
    param = saved;
    return (up - down) / (2.0 * step);
  };

  for (std::size_t m = 0; m < nodes.size(); ++m) {
    SoftNode& node = *nodes[m];
    NodeGrads& ng = grads.nodes[m];
    {
      const double saved = node.gamma;
      if (saved + step > 1.0) {
        const double here = loss();
        node.gamma = saved - step;
        ng.d_gamma = (here - loss()) / step;
      } else if (saved - step < 0.0) {
        node.gamma = saved + step;
        const double up = loss();
        node.gamma = saved;
        ng.d_gamma = (up - loss()) / step;
      } else {
        ng.d_gamma = central(node.gamma);
      }
      node.gamma = saved;
    }
    for (std::size_t j = 0; j < node.w.size(); ++j) ng.d_w[j] = central(node.w[j]);
    for (std::size_t j = 0; j < node.v.size(); ++j) ng.d_v[j] = central(node.v[j]);
    for (std::size_t j = 0; j < node.rho.size(); ++j) ng.d_rho[j] = central(node.rho[j]);
  }
  return grads;
}

double relative_error(double a, double b) noexcept {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace softgrove
