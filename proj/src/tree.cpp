#include "softgrove/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softgrove/errors.hpp"

namespace softgrove {

namespace {

// Large enough that sigmoid() returns exactly 1.0 in double precision.
constexpr double kSaturatedLogit = 1000.0;

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void check_input(const SoftTree& tree, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(tree.input_dim) + 1) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) +
                                " coordinates, tree expects " +
                                std::to_string(tree.input_dim + 1) + " (bias included)");
  }
}

// Left/right gate activations at an internal node.
struct Gates {
  double left;
  double right;
};

Gates gates_at(const SoftTree& tree, const SoftNode& node, std::span<const double> x) {
  const double gl = sigmoid(dot(node.w, x));
  double gr = 0.0;
  if (tree.kind == TreeKind::distributed) {
    if (node.v.size() != node.w.size()) {
      throw StructuralError("distributed node is missing its right-gate weights");
    }
    gr = sigmoid(dot(node.v, x));
  }
  if (tree.hard_threshold) {
    const double t = *tree.hard_threshold;
    const double hl = gl > t ? 1.0 : 0.0;
    const double hr = tree.kind == TreeKind::distributed ? (gr > t ? 1.0 : 0.0) : 1.0 - hl;
    return {hl, hr};
  }
  if (tree.kind != TreeKind::distributed) gr = 1.0 - gl;
  return {gl, gr};
}

// Adds weight * y_m(x) into out.
void accumulate(const SoftTree& tree, const SoftNode& node, std::span<const double> x,
                double weight, std::span<double> out) {
  if (node.gamma != 0.0) axpy(weight * node.gamma, node.rho, out);
  if (node.gamma >= 1.0 || node.is_childless()) return;
  if (!node.has_children()) throw StructuralError("internal node is missing a child");
  const Gates g = gates_at(tree, node, x);
  const double inner = weight * (1.0 - node.gamma);
  if (g.left != 0.0) accumulate(tree, *node.left, x, inner * g.left, out);
  if (g.right != 0.0) accumulate(tree, *node.right, x, inner * g.right, out);
}

std::vector<double> eval_soft_family(const SoftTree& tree, std::span<const double> x) {
  check_input(tree, x);
  std::vector<double> out(static_cast<std::size_t>(tree.output_dim), 0.0);
  accumulate(tree, tree.root, x, 1.0, out);
  return out;
}

template <typename Node, typename Fn>
void walk_preorder(Node& node, Fn&& fn) {
  fn(node);
  if (node.left) walk_preorder(*node.left, fn);
  if (node.right) walk_preorder(*node.right, fn);
}

std::size_t count_nodes(const SoftNode& n) {
  std::size_t c = 1;
  if (n.left) c += count_nodes(*n.left);
  if (n.right) c += count_nodes(*n.right);
  return c;
}

std::size_t count_nodes(const HardNode& n) {
  std::size_t c = 1;
  if (n.left) c += count_nodes(*n.left);
  if (n.right) c += count_nodes(*n.right);
  return c;
}

std::size_t depth_of(const SoftNode& n) {
  std::size_t d = 0;
  if (n.left) d = std::max(d, 1 + depth_of(*n.left));
  if (n.right) d = std::max(d, 1 + depth_of(*n.right));
  return d;
}

SoftNode make_leaf(std::vector<double> rho) {
  SoftNode leaf;
  leaf.gamma = 1.0;
  leaf.rho = std::move(rho);
  return leaf;
}

// Rewrites a budding/soft subtree. The caller's view of this node is
// scale * y_m + offset; the offset can be handed to both children because
// their gates sum to one.
void soften_budding(const SoftNode& in, double scale, const std::vector<double>& offset,
                    SoftNode& out, std::size_t dim) {
  out.w = in.w;
  if (in.is_childless() || !in.has_children()) {
    if (!in.is_childless()) throw StructuralError("internal node is missing a child");
    out.gamma = 1.0;
    out.rho.assign(offset.begin(), offset.end());
    axpy(scale * in.gamma, in.rho, out.rho);
    return;
  }
  std::vector<double> child_offset = offset;
  axpy(scale * in.gamma, in.rho, child_offset);
  const double child_scale = scale * (1.0 - in.gamma);
  out.gamma = 0.0;
  out.rho.assign(dim, 0.0);
  out.left = std::make_unique<SoftNode>();
  out.right = std::make_unique<SoftNode>();
  soften_budding(*in.left, child_scale, child_offset, *out.left, dim);
  soften_budding(*in.right, child_scale, child_offset, *out.right, dim);
}

// Distributed variant: only a multiplicative scale travels down the path.
void soften_distributed(const SoftNode& in, double scale, SoftNode& out, std::size_t dim,
                        std::size_t width) {
  if (in.is_childless()) {
    out = make_leaf(std::vector<double>(dim, 0.0));
    out.w = in.w;
    out.v = in.v;
    axpy(scale * in.gamma, in.rho, out.rho);
    return;
  }
  if (!in.has_children()) throw StructuralError("internal node is missing a child");
  if (in.v.size() != in.w.size()) {
    throw StructuralError("distributed node is missing its right-gate weights");
  }

  SoftNode split;
  split.gamma = 0.0;
  split.w = in.w;
  split.v = in.v;
  split.rho.assign(dim, 0.0);
  split.left = std::make_unique<SoftNode>();
  split.right = std::make_unique<SoftNode>();
  const double child_scale = scale * (1.0 - in.gamma);
  soften_distributed(*in.left, child_scale, *split.left, dim, width);
  soften_distributed(*in.right, child_scale, *split.right, dim, width);

  if (in.gamma == 0.0) {
    out = std::move(split);
    return;
  }

  std::vector<double> always(width, 0.0);
  always[0] = kSaturatedLogit;
  std::vector<double> local(dim, 0.0);
  axpy(scale * in.gamma, in.rho, local);

  out = SoftNode{};
  out.gamma = 0.0;
  out.w = always;
  out.v = always;
  out.rho.assign(dim, 0.0);
  out.left = std::make_unique<SoftNode>(make_leaf(std::move(local)));
  out.left->w.assign(width, 0.0);
  out.left->v.assign(width, 0.0);
  out.right = std::make_unique<SoftNode>(std::move(split));
}

void collect_active(const SoftTree& tree, const SoftNode& node, std::span<const double> x,
                    bool reached, std::size_t& next_id, LeafSet& out) {
  const std::size_t id = next_id++;
  if (node.gamma >= 1.0 || node.is_childless()) {
    if (reached && node.gamma >= 1.0) out.push_back(id);
    // Skip identifiers of the cut-off subtree so numbering stays preorder.
    if (node.left) next_id += count_nodes(*node.left);
    if (node.right) next_id += count_nodes(*node.right);
    return;
  }
  if (!node.has_children()) throw StructuralError("internal node is missing a child");
  Gates g{0.0, 0.0};
  if (reached) g = gates_at(tree, node, x);
  collect_active(tree, *node.left, x, reached && g.left == 1.0, next_id, out);
  collect_active(tree, *node.right, x, reached && g.right == 1.0, next_id, out);
}

void prune_node(SoftNode& node, double eps) {
  if (node.gamma >= 1.0 - eps) {
    node.gamma = 1.0;
    node.left.reset();
    node.right.reset();
    return;
  }
  if (node.left) prune_node(*node.left, eps);
  if (node.right) prune_node(*node.right, eps);
}

void validate_node(const SoftTree& tree, const SoftNode& node) {
  const auto width = static_cast<std::size_t>(tree.input_dim) + 1;
  if (node.left.operator bool() != node.right.operator bool()) {
    throw StructuralError("node has exactly one child");
  }
  if (!(node.gamma >= 0.0 && node.gamma <= 1.0)) {
    throw StructuralError("gamma outside [0,1]");
  }
  if (node.rho.size() != static_cast<std::size_t>(tree.output_dim)) {
    throw StructuralError("response length does not match output_dim");
  }
  if (node.w.size() != width) throw StructuralError("gate weight length does not match input_dim + 1");
  if (tree.kind == TreeKind::distributed) {
    if (node.v.size() != width) throw StructuralError("distributed node is missing its right-gate weights");
  } else if (!node.v.empty()) {
    throw StructuralError("right-gate weights present on a non-distributed tree");
  }
  if (node.left) {
    validate_node(tree, *node.left);
    validate_node(tree, *node.right);
  }
}

void validate_hard_node(const HardTree& tree, const HardNode& node) {
  if (node.rho.size() != static_cast<std::size_t>(tree.output_dim)) {
    throw StructuralError("response length does not match output_dim");
  }
  if (node.is_leaf()) {
    if (node.left || node.right) throw StructuralError("hard leaf has children");
    return;
  }
  if (node.attr < 1 || node.attr > tree.input_dim) throw StructuralError("split attribute out of range");
  if (!node.left || !node.right) throw StructuralError("internal node is missing a child");
  validate_hard_node(tree, *node.left);
  validate_hard_node(tree, *node.right);
}

}  // namespace

SoftNode::SoftNode(const SoftNode& other)
    : gamma(other.gamma),
      w(other.w),
      v(other.v),
      rho(other.rho),
      left(other.left ? std::make_unique<SoftNode>(*other.left) : nullptr),
      right(other.right ? std::make_unique<SoftNode>(*other.right) : nullptr) {}

SoftNode& SoftNode::operator=(const SoftNode& other) {
  if (this != &other) {
    SoftNode copy(other);
    *this = std::move(copy);
  }
  return *this;
}

HardNode::HardNode(const HardNode& other)
    : attr(other.attr),
      threshold(other.threshold),
      rho(other.rho),
      left(other.left ? std::make_unique<HardNode>(*other.left) : nullptr),
      right(other.right ? std::make_unique<HardNode>(*other.right) : nullptr) {}

HardNode& HardNode::operator=(const HardNode& other) {
  if (this != &other) {
    HardNode copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::string_view to_string(TreeKind kind) {
  switch (kind) {
    case TreeKind::soft: return "soft";
    case TreeKind::budding: return "budding";
    case TreeKind::distributed: return "distributed";
  }
  return "?";
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::regression: return "regression";
    case Task::binary: return "binary";
    case Task::multiclass: return "multiclass";
  }
  return "?";
}

TreeKind parse_tree_kind(std::string_view name) {
  if (name == "soft") return TreeKind::soft;
  if (name == "budding") return TreeKind::budding;
  if (name == "distributed") return TreeKind::distributed;
  throw std::invalid_argument("unknown tree kind '" + std::string(name) + "'");
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "binary") return Task::binary;
  if (name == "multiclass") return Task::multiclass;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double sigmoid_gate(std::span<const double> w, std::span<const double> x) {
  if (w.size() != x.size()) {
    throw std::invalid_argument("gate weights have length " + std::to_string(w.size()) +
                                " but input has " + std::to_string(x.size()));
  }
  return sigmoid(dot(w, x));
}

std::vector<double> eval_hard(const HardTree& tree, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(tree.input_dim) + 1) {
    throw std::invalid_argument("input dimension does not match the tree");
  }
  const HardNode* node = &tree.root;
  while (!node->is_leaf()) {
    if (!node->left || !node->right) throw StructuralError("internal node is missing a child");
    node = x[static_cast<std::size_t>(node->attr)] - node->threshold > 0.0 ? node->left.get()
                                                                          : node->right.get();
  }
  return node->rho;
}

std::vector<double> eval_budding(const SoftTree& tree, std::span<const double> x) {
  if (tree.kind == TreeKind::distributed) {
    throw ContractError("eval_budding called on a distributed tree");
  }
  return eval_soft_family(tree, x);
}

std::vector<double> eval_distributed(const SoftTree& tree, std::span<const double> x) {
  if (tree.kind != TreeKind::distributed) {
    throw ContractError("eval_distributed called on a non-distributed tree");
  }
  return eval_soft_family(tree, x);
}

std::vector<double> evaluate(const SoftTree& tree, std::span<const double> x) {
  return eval_soft_family(tree, x);
}

SoftTree to_soft(const SoftTree& tree) {
  if (tree.hardened()) throw ContractError("to_soft called on a hardened tree");
  SoftTree out;
  out.input_dim = tree.input_dim;
  out.output_dim = tree.output_dim;
  out.task = tree.task;
  const auto dim = static_cast<std::size_t>(tree.output_dim);
  if (tree.kind == TreeKind::distributed) {
    out.kind = TreeKind::distributed;
    soften_distributed(tree.root, 1.0, out.root, dim, static_cast<std::size_t>(tree.input_dim) + 1);
  } else {
    out.kind = TreeKind::soft;
    soften_budding(tree.root, 1.0, std::vector<double>(dim, 0.0), out.root, dim);
  }
  return out;
}

SoftTree harden(const SoftTree& tree, double gate_threshold) {
  if (!(gate_threshold > 0.0 && gate_threshold < 1.0)) {
    throw std::invalid_argument("gate threshold must lie in (0,1)");
  }
  SoftTree out = tree;
  walk_preorder(out.root, [](SoftNode& n) { n.gamma = n.gamma >= 0.5 || n.is_childless() ? 1.0 : 0.0; });
  out.hard_threshold = gate_threshold;
  return out;
}

LeafSet active_leaves(const SoftTree& tree, std::span<const double> x) {
  if (!tree.hardened()) throw ContractError("active_leaves requires a hardened tree");
  check_input(tree, x);
  LeafSet out;
  std::size_t next_id = 0;
  collect_active(tree, tree.root, x, true, next_id, out);
  return out;
}

std::size_t tree_size(const SoftTree& tree) { return count_nodes(tree.root); }
std::size_t tree_size(const HardTree& tree) { return count_nodes(tree.root); }
std::size_t tree_depth(const SoftTree& tree) { return depth_of(tree.root); }

SoftTree prune(const SoftTree& tree, double eps) {
  SoftTree out = tree;
  prune_in_place(out, eps);
  return out;
}

void prune_in_place(SoftTree& tree, double eps) {
  if (eps < 0.0) throw std::invalid_argument("prune eps must be nonnegative");
  prune_node(tree.root, eps);
}

std::vector<const SoftNode*> preorder(const SoftTree& tree) {
  std::vector<const SoftNode*> out;
  walk_preorder(tree.root, [&](const SoftNode& n) { out.push_back(&n); });
  return out;
}

std::vector<SoftNode*> preorder(SoftTree& tree) {
  std::vector<SoftNode*> out;
  walk_preorder(tree.root, [&](SoftNode& n) { out.push_back(&n); });
  return out;
}

void validate(const SoftTree& tree) {
  if (tree.input_dim < 0 || tree.output_dim < 1) throw StructuralError("invalid tree dimensions");
  validate_node(tree, tree.root);
  if (tree.kind == TreeKind::soft) {
    bool ok = true;
    walk_preorder(tree.root, [&](const SoftNode& n) {
      if (n.has_children() ? n.gamma != 0.0 : n.gamma != 1.0) ok = false;
    });
    if (!ok) throw StructuralError("soft tree needs gamma = 0 on internal nodes and 1 on leaves");
  }
}

void validate(const HardTree& tree) {
  if (tree.input_dim < 0 || tree.output_dim < 1) throw StructuralError("invalid tree dimensions");
  validate_hard_node(tree, tree.root);
}

SoftTree make_bud(TreeKind kind, Task task, int input_dim, std::vector<double> rho) {
  SoftTree t;
  t.kind = kind;
  t.task = task;
  t.input_dim = input_dim;
  t.output_dim = static_cast<int>(rho.size());
  t.root.gamma = 1.0;
  t.root.rho = std::move(rho);
  t.root.w.assign(static_cast<std::size_t>(input_dim) + 1, 0.0);
  if (kind == TreeKind::distributed) t.root.v.assign(static_cast<std::size_t>(input_dim) + 1, 0.0);
  return t;
}

}  // namespace softgrove
