#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace softgrove {

enum class TreeKind { soft, budding, distributed };
enum class Task { regression, binary, multiclass };

std::string_view to_string(TreeKind kind);
std::string_view to_string(Task task);
TreeKind parse_tree_kind(std::string_view name);
Task parse_task(std::string_view name);

// A bud node: part internal node, part leaf, mixed by the leafness gamma.
//
// Weight vectors have length input_dim + 1; index 0 multiplies the constant
// bias coordinate of the augmented input. `v` holds the right-child gate of a
// distributed tree and is empty for soft and budding trees.
struct SoftNode {
  double gamma = 1.0;
  std::vector<double> w;
  std::vector<double> v;
  std::vector<double> rho;
  std::unique_ptr<SoftNode> left;
  std::unique_ptr<SoftNode> right;

  SoftNode() = default;
  SoftNode(const SoftNode& other);
  SoftNode& operator=(const SoftNode& other);
  SoftNode(SoftNode&&) noexcept = default;
  SoftNode& operator=(SoftNode&&) noexcept = default;
  ~SoftNode() = default;

  bool has_children() const noexcept { return left != nullptr && right != nullptr; }
  bool is_childless() const noexcept { return left == nullptr && right == nullptr; }
};

struct SoftTree {
  SoftNode root;
  TreeKind kind = TreeKind::budding;
  int input_dim = 0;
  int output_dim = 1;
  Task task = Task::regression;
  // Set once the tree has been hardened: gates become [sigma(.) > threshold].
  std::optional<double> hard_threshold;

  bool hardened() const noexcept { return hard_threshold.has_value(); }
};

// Univariate hard tree. Internal nodes test x[attr] - threshold > 0 on the
// augmented input (attr in 1..d) and keep their own training response so a
// subtree can be collapsed during pruning.
struct HardNode {
  int attr = 0;  // 0 marks a leaf
  double threshold = 0.0;
  std::vector<double> rho;
  std::unique_ptr<HardNode> left;
  std::unique_ptr<HardNode> right;

  HardNode() = default;
  HardNode(const HardNode& other);
  HardNode& operator=(const HardNode& other);
  HardNode(HardNode&&) noexcept = default;
  HardNode& operator=(HardNode&&) noexcept = default;
  ~HardNode() = default;

  bool is_leaf() const noexcept { return attr == 0; }
};

struct HardTree {
  HardNode root;
  int input_dim = 0;
  int output_dim = 1;
  Task task = Task::regression;
};

// Preorder identifiers of leaves, ascending.
using LeafSet = std::vector<std::size_t>;

// Logistic function, stable for large |z|.
double sigmoid(double z) noexcept;

// sigma(w^T x) for an augmented input (x[0] == 1).
double sigmoid_gate(std::span<const double> w, std::span<const double> x);

std::vector<double> eval_hard(const HardTree& tree, std::span<const double> x);
std::vector<double> eval_budding(const SoftTree& tree, std::span<const double> x);
std::vector<double> eval_distributed(const SoftTree& tree, std::span<const double> x);

// Dispatches on tree.kind.
std::vector<double> evaluate(const SoftTree& tree, std::span<const double> x);

// Equivalent tree with internal gamma = 0 and leaf gamma = 1.
//
// Budding trees keep their topology and become kind `soft`. For distributed
// trees the node-local term gamma*rho cannot be pushed through two
// independent gates, so each internal node with gamma > 0 is rewritten as a
// summing node (both gates saturated at exactly 1) over a constant leaf and
// the original split; the result stays kind `distributed`.
SoftTree to_soft(const SoftTree& tree);

SoftTree harden(const SoftTree& tree, double gate_threshold = 0.5);

LeafSet active_leaves(const SoftTree& tree, std::span<const double> x);

std::size_t tree_size(const SoftTree& tree);
std::size_t tree_size(const HardTree& tree);
std::size_t tree_depth(const SoftTree& tree);

// Drops the subtree of every node with gamma >= 1 - eps and sets its gamma to 1.
SoftTree prune(const SoftTree& tree, double eps);
void prune_in_place(SoftTree& tree, double eps);

// Nodes in preorder; the position is the node's stable identifier.
std::vector<const SoftNode*> preorder(const SoftTree& tree);
std::vector<SoftNode*> preorder(SoftTree& tree);

// Throws StructuralError if the tree violates its shape invariants.
void validate(const SoftTree& tree);
void validate(const HardTree& tree);

// New single-bud tree: gamma = 1, zero gates, the given response.
SoftTree make_bud(TreeKind kind, Task task, int input_dim, std::vector<double> rho);

}  // namespace softgrove
