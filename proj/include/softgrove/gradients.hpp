#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "softgrove/data.hpp"
#include "softgrove/tree.hpp"

namespace softgrove {

enum class Link { identity, logistic, softmax };

// Output link and complexity penalty. The link is fixed by the task:
// regression/identity, binary/logistic, multiclass/softmax.
struct LossSpec {
  Task task = Task::regression;
  Link link = Link::identity;
  double lambda = 0.0;

  static LossSpec for_task(Task task, double lambda = 0.0);
  void check() const;
};

Link link_for(Task task) noexcept;

// Applies the link to a raw tree response in place.
void apply_link(Link link, std::span<double> response);

struct NodeGrads {
  double d_gamma = 0.0;
  std::vector<double> d_w;
  std::vector<double> d_v;  // distributed trees only
  std::vector<double> d_rho;
};

// One entry per node, in preorder (the node's identifier).
struct ParamGrads {
  std::vector<NodeGrads> nodes;

  // Every component in a fixed order, with a readable name for each.
  std::vector<double> flatten() const;
  std::vector<std::string> names() const;
};

// Zero-filled gradient container shaped like `tree`.
ParamGrads zeros_like(const SoftTree& tree);

// Mean per-sample loss over `rows` (all rows when empty) plus
// lambda * sum over nodes of (1 - gamma).
double forward_loss(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                    std::span<const std::size_t> rows = {});

// Exact gradient of forward_loss. When `loss_out` is set it receives the loss
// from the same forward pass.
ParamGrads backward(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                    std::span<const std::size_t> rows = {}, double* loss_out = nullptr);

// Central differences, one coordinate at a time. Gamma steps never leave
// [0,1]; at the boundary a one-sided difference is used.
ParamGrads finite_diff_grads(const SoftTree& tree, const Dataset& batch, const LossSpec& spec,
                             double step = 1e-5, std::span<const std::size_t> rows = {});

// |a-b| / max(1, |a|, |b|)
double relative_error(double a, double b) noexcept;

}  // namespace softgrove
