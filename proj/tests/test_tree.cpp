#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "softgrove/errors.hpp"
#include "softgrove/random_tree.hpp"
#include "softgrove/tree.hpp"

using namespace softgrove;
using fixtures::naive;
using fixtures::random_input;
using fixtures::stump;

namespace {

HardTree hard_stump() {
  HardTree t;
  t.input_dim = 1;
  t.root.attr = 1;
  t.root.threshold = 0.0;
  t.root.rho = {0.5};
  t.root.left = std::make_unique<HardNode>();
  t.root.left->rho = {1.0};
  t.root.right = std::make_unique<HardNode>();
  t.root.right->rho = {0.0};
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("sigmoid gate values") {
  const std::vector<double> zero(4, 0.0);
  const std::vector<double> x{1.0, -3.0, 8.0, 0.25};
  CHECK(sigmoid_gate(zero, x) == 0.5);

  // 1 / (1 + e^-10)
  CHECK(sigmoid_gate(std::vector<double>{10.0}, std::vector<double>{1.0}) ==
        doctest::Approx(0.9999546021312976).epsilon(1e-15));
  CHECK(sigmoid_gate(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 3.7}) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-15));
}

TEST_CASE("sigmoid saturates without overflow") {
  const double hi = sigmoid_gate(std::vector<double>{1000.0}, std::vector<double>{1.0});
  const double lo = sigmoid_gate(std::vector<double>{-1000.0}, std::vector<double>{1.0});
  CHECK(hi == 1.0);
  CHECK(lo >= 0.0);
  CHECK(lo < 1e-300);
  CHECK(std::isfinite(sigmoid(-1e6)));
}

TEST_CASE("sigmoid gate rejects mismatched lengths") {
  CHECK_THROWS_AS(sigmoid_gate(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("hard tree evaluation") {
  HardTree single;
  single.input_dim = 1;
  single.root.rho = {3.2};
  CHECK(eval_hard(single, std::vector<double>{1.0, -7.0})[0] == 3.2);

  const HardTree t = hard_stump();
  CHECK(eval_hard(t, std::vector<double>{1.0, 0.5})[0] == 1.0);
  CHECK(eval_hard(t, std::vector<double>{1.0, -0.5})[0] == 0.0);
  CHECK(eval_hard(t, std::vector<double>{1.0, 0.0})[0] == 0.0);
}

TEST_CASE("hard tree with a missing child is a structural error") {
  HardTree t = hard_stump();
  t.root.right.reset();
  CHECK_THROWS_AS(eval_hard(t, std::vector<double>{1.0, -1.0}), StructuralError);
  CHECK_THROWS_AS(validate(t), StructuralError);
}

TEST_CASE("budding evaluation") {
  SoftTree bud = make_bud(TreeKind::budding, Task::regression, 2, {0.7});
  CHECK(eval_budding(bud, std::vector<double>{1.0, 4.0, -2.0})[0] == 0.7);

  const SoftTree sym = stump(TreeKind::budding, 0.0, 0.0, 0.0, 1.0);
  CHECK(eval_budding(sym, std::vector<double>{1.0, 2.0})[0] == 0.5);

  const SoftTree half = stump(TreeKind::budding, 0.5, 1.0, 0.0, 2.0);
  const std::vector<double> x{1.0, 0.3};
  CHECK(naive(half, x)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval_budding(half, x)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("budding evaluation matches the naive recursion on random trees") {
  std::mt19937_64 rng(11);
  RandomTreeOptions opt;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + static_cast<int>(rng() % 5);
    const SoftTree t = random_tree(TreeKind::budding, Task::regression, d, 2, opt, rng);
    const auto x = random_input(d, rng);
    CHECK(max_abs_diff(eval_budding(t, x), naive(t, x)) <= 1e-12);
  }
}

TEST_CASE("budding output stays within the response bound") {
  std::mt19937_64 rng(12);
  RandomTreeOptions opt;
  opt.depth = 4;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 200; ++i) {
    const SoftTree t = random_tree(TreeKind::budding, Task::regression, 3, 1, opt, rng);
    double bound = 0.0;
    for (const SoftNode* n : preorder(t)) bound = std::max(bound, std::abs(n->rho[0]));
    const auto x = random_input(3, rng);
    CHECK(std::abs(eval_budding(t, x)[0]) <= bound + 1e-12);
  }
}

TEST_CASE("one missing child is a structural error") {
  SoftTree t = stump(TreeKind::budding, 0.2, 1.0, 0.0, 2.0);
  t.root.right.reset();
  CHECK_THROWS_AS(eval_budding(t, std::vector<double>{1.0, 0.0}), StructuralError);
  CHECK_THROWS_AS(validate(t), StructuralError);
}

TEST_CASE("childless node below gamma 1 contributes gamma * rho") {
  SoftTree t = make_bud(TreeKind::budding, Task::regression, 1, {2.0});
  t.root.gamma = 0.25;
  CHECK(eval_budding(t, std::vector<double>{1.0, 3.0})[0] == 0.5);
}

TEST_CASE("distributed evaluation") {
  const SoftTree sym = stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0);
  CHECK(eval_distributed(sym, std::vector<double>{1.0, -1.0})[0] == 1.0);

  SoftTree both = stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0);
  both.root.w = {20.0, 0.0};
  both.root.v = {20.0, 0.0};
  const double y = eval_distributed(both, std::vector<double>{1.0, 5.0})[0];
  CHECK(y == doctest::Approx(2.0 / (1.0 + std::exp(-20.0))).epsilon(1e-15));
  CHECK(y > 1.9999999);
  CHECK(y > 1.0);
}

TEST_CASE("distributed evaluation matches the naive recursion on random trees") {
  std::mt19937_64 rng(13);
  RandomTreeOptions opt;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + static_cast<int>(rng() % 5);
    const SoftTree t = random_tree(TreeKind::distributed, Task::multiclass, d, 3, opt, rng);
    const auto x = random_input(d, rng);
    CHECK(max_abs_diff(eval_distributed(t, x), naive(t, x)) <= 1e-12);
  }
}

TEST_CASE("evaluators reject the wrong tree kind") {
  const SoftTree d = stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0);
  const SoftTree b = stump(TreeKind::budding, 0.0, 0.0, 1.0, 1.0);
  CHECK_THROWS_AS(eval_budding(d, std::vector<double>{1.0, 0.0}), ContractError);
  CHECK_THROWS_AS(eval_distributed(b, std::vector<double>{1.0, 0.0}), ContractError);
}

TEST_CASE("distributed node without v is a structural error") {
  SoftTree t = stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0);
  t.root.v.clear();
  CHECK_THROWS_AS(validate(t), StructuralError);
}

TEST_CASE("v = -w reduces distributed to budding") {
  std::mt19937_64 rng(14);
  RandomTreeOptions opt;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 300; ++i) {
    const int d = 1 + static_cast<int>(rng() % 5);
    SoftTree dist = random_tree(TreeKind::distributed, Task::regression, d, 1, opt, rng);
    for (SoftNode* n : preorder(dist)) {
      n->v = n->w;
      for (double& c : n->v) c = -c;
    }
    SoftTree bud = dist;
    bud.kind = TreeKind::budding;
    for (SoftNode* n : preorder(bud)) n->v.clear();
    const auto x = random_input(d, rng);
    CHECK(max_abs_diff(eval_distributed(dist, x), eval_budding(bud, x)) <= 1e-12);
  }
}

TEST_CASE("to_soft on a soft tree keeps the structure") {
  const SoftTree t = stump(TreeKind::soft, 0.0, 0.0, 0.25, -1.0);
  const SoftTree s = to_soft(t);
  CHECK(s.kind == TreeKind::soft);
  CHECK(tree_size(s) == 3);
  CHECK(s.root.gamma == 0.0);
  CHECK(s.root.left->rho[0] == 0.25);
  CHECK(s.root.right->rho[0] == -1.0);
}

TEST_CASE("to_soft distributes the partial leaf contribution") {
  const SoftTree t = stump(TreeKind::budding, 0.5, 1.0, 0.0, 2.0);
  const SoftTree s = to_soft(t);
  CHECK(s.kind == TreeKind::soft);
  CHECK(tree_size(s) == 3);
  CHECK(s.root.gamma == 0.0);
  CHECK(s.root.left->gamma == 1.0);
  CHECK(s.root.left->rho[0] == doctest::Approx(0.5));
  CHECK(s.root.right->rho[0] == doctest::Approx(1.5));
}

TEST_CASE("to_soft is output preserving") {
  std::mt19937_64 rng(15);
  RandomTreeOptions opt;
  opt.unit_leaf_gamma = false;
  for (const TreeKind kind : {TreeKind::budding, TreeKind::distributed}) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const SoftTree t = random_tree(kind, Task::regression, 3, 2, opt, rng);
      const SoftTree s = to_soft(t);
      for (const SoftNode* n : preorder(s)) {
        const bool leaf = n->is_childless();
        CHECK((leaf ? n->gamma == 1.0 : n->gamma == 0.0));
      }
      const auto x = random_input(3, rng);
      worst = std::max(worst, max_abs_diff(evaluate(s, x), evaluate(t, x)));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("budding to_soft keeps the topology and leaf weights sum to one") {
  std::mt19937_64 rng(16);
  RandomTreeOptions opt;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 100; ++i) {
    const SoftTree t = random_tree(TreeKind::budding, Task::regression, 2, 1, opt, rng);
    SoftTree s = to_soft(t);
    CHECK(tree_size(s) == tree_size(t));
    // Unit responses: the output is the total path weight.
    for (SoftNode* n : preorder(s)) n->rho = {n->is_childless() ? 1.0 : 0.0};
    const auto x = random_input(2, rng);
    CHECK(evaluate(s, x)[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("harden rounds gamma and keeps the structure") {
  SoftTree t = stump(TreeKind::budding, 0.3, 1.0, 0.0, 2.0);
  t.root.left->gamma = 0.6;
  t.root.right->gamma = 0.2;
  const SoftTree h = harden(t);
  CHECK(h.hardened());
  CHECK(h.root.gamma == 0.0);
  CHECK(h.root.left->gamma == 1.0);
  // childless nodes stay leaves
  CHECK(h.root.right->gamma == 1.0);
  CHECK(tree_size(h) == 3);
  CHECK_THROWS_AS(harden(t, 1.0), std::invalid_argument);
}

TEST_CASE("hardened budding trees select a single leaf") {
  std::mt19937_64 rng(17);
  RandomTreeOptions opt;
  opt.depth = 4;
  for (int i = 0; i < 200; ++i) {
    opt.unit_leaf_gamma = i % 2 == 0;
    const SoftTree t = harden(random_tree(TreeKind::budding, Task::regression, 3, 1, opt, rng));
    const auto x = random_input(3, rng);
    CHECK(active_leaves(t, x).size() == 1);
  }
}

TEST_CASE("hardened distributed gates") {
  // sigma(w^T x) = 0.9 and sigma(v^T x) = 0.8
  SoftTree t = stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0);
  t.root.w = {std::log(9.0), 0.0};
  t.root.v = {std::log(4.0), 0.0};
  const SoftTree h = harden(t);
  CHECK(active_leaves(h, std::vector<double>{1.0, 0.0}) == LeafSet{1, 2});
  CHECK(evaluate(h, std::vector<double>{1.0, 0.0})[0] == 2.0);

  t.root.w = {-3.0, 0.0};
  t.root.v = {-3.0, 0.0};
  CHECK(active_leaves(harden(t), std::vector<double>{1.0, 0.0}).empty());
}

TEST_CASE("gate exactly at the threshold is inactive") {
  const SoftTree h = harden(stump(TreeKind::distributed, 0.0, 0.0, 1.0, 1.0), 0.5);
  CHECK(active_leaves(h, std::vector<double>{1.0, 0.0}).empty());
  const SoftTree b = harden(stump(TreeKind::budding, 0.0, 0.0, 1.0, 3.0), 0.5);
  CHECK(active_leaves(b, std::vector<double>{1.0, 0.0}) == LeafSet{2});
}

TEST_CASE("active_leaves needs a hardened tree") {
  const SoftTree t = stump(TreeKind::budding, 0.0, 0.0, 1.0, 1.0);
  CHECK_THROWS_AS(active_leaves(t, std::vector<double>{1.0, 0.0}), ContractError);
}

TEST_CASE("active leaf ids are preorder positions") {
  std::mt19937_64 rng(18);
  RandomTreeOptions opt;
  opt.depth = 3;
  for (int i = 0; i < 100; ++i) {
    const SoftTree t = harden(random_tree(TreeKind::distributed, Task::binary, 2, 1, opt, rng));
    const auto nodes = preorder(t);
    const LeafSet leaves = active_leaves(t, random_input(2, rng));
    std::set<std::size_t> seen(leaves.begin(), leaves.end());
    CHECK(seen.size() == leaves.size());
    for (const std::size_t id : leaves) {
      REQUIRE(id < nodes.size());
      CHECK(nodes[id]->gamma == 1.0);
    }
  }
}

TEST_CASE("tree size") {
  CHECK(tree_size(make_bud(TreeKind::budding, Task::regression, 1, {0.0})) == 1);
  SoftTree t = stump(TreeKind::budding, 0.0, 0.0, 0.0, 0.0);
  t.root.left = std::make_unique<SoftNode>(stump(TreeKind::budding, 0.0, 0.0, 0.0, 0.0).root);
  t.root.right = std::make_unique<SoftNode>(stump(TreeKind::budding, 0.0, 0.0, 0.0, 0.0).root);
  CHECK(tree_size(t) == 7);
  CHECK(tree_depth(t) == 2);
}

TEST_CASE("pruning a gamma = 1 subtree") {
  SoftTree t = stump(TreeKind::budding, 0.0, 0.0, 0.0, 0.0);
  t.root.left = std::make_unique<SoftNode>(stump(TreeKind::budding, 1.0, 4.0, -1.0, 9.0).root);
  const std::size_t before = tree_size(t);
  const SoftTree p = prune(t, 0.0);
  CHECK(tree_size(p) == before - 2);
  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_input(1, rng);
    CHECK(evaluate(p, x)[0] == evaluate(t, x)[0]);
  }
}

TEST_CASE("prune uses the original gammas and is idempotent") {
  std::mt19937_64 rng(20);
  RandomTreeOptions opt;
  opt.depth = 4;
  opt.unit_leaf_gamma = false;
  for (int i = 0; i < 100; ++i) {
    SoftTree t = random_tree(TreeKind::budding, Task::regression, 2, 1, opt, rng);
    for (SoftNode* n : preorder(t)) {
      if (rng() % 3 == 0) n->gamma = 0.995;
    }
    const SoftTree once = prune(t, 0.01);
    const SoftTree twice = prune(once, 0.01);
    CHECK(tree_size(once) <= tree_size(t));
    CHECK(tree_size(twice) == tree_size(once));
    for (const SoftNode* n : preorder(once)) {
      if (n->gamma >= 0.99) {
        CHECK(n->gamma == 1.0);
        CHECK(n->is_childless());
      }
    }
  }
  CHECK_THROWS_AS(prune(make_bud(TreeKind::budding, Task::regression, 1, {0.0}), -1.0),
                  std::invalid_argument);
}

TEST_CASE("copies are deep") {
  SoftTree t = stump(TreeKind::budding, 0.5, 1.0, 0.0, 2.0);
  SoftTree c = t;
  c.root.left->rho[0] = 100.0;
  CHECK(t.root.left->rho[0] == 0.0);
}
