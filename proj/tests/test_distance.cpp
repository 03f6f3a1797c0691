#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "uparse/distance.hpp"
#include "uparse/errors.hpp"
#include "uparse/trees.hpp"

using namespace uparse;

namespace {

DistanceVector dv(std::initializer_list<double> values) {
  DistanceVector d(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) d[i++] = v;
  return d;
}

BinaryTree w(int i) { return BinaryTree::leaf(Token{"w" + std::to_string(i), i}); }

}  // namespace

TEST_CASE("scheme A splits at the largest distance") {
  CHECK(infer_tree_scheme_a(dv({3, 1, 2})) ==
        BinaryTree::node(w(1), BinaryTree::node(BinaryTree::node(w(2), w(3)), w(4))));
  CHECK(infer_tree_scheme_a(dv({1})) == BinaryTree::node(w(1), w(2)));
  CHECK(infer_tree_scheme_a(dv({3, 2, 1})) ==
        baseline_tree(BaselineKind::RightBranching, 4));
  CHECK(infer_tree_scheme_a(DistanceVector()) == w(1));
}

TEST_CASE("scheme B forces a singleton after the split") {
  CHECK(infer_tree_scheme_b(dv({3, 1, 2})) ==
        BinaryTree::node(w(1), BinaryTree::node(w(2), BinaryTree::node(w(3), w(4)))));
  CHECK(infer_tree_scheme_b(dv({1, 3, 2})) ==
        BinaryTree::node(BinaryTree::node(w(1), w(2)),
                         BinaryTree::node(w(3), w(4))));
  CHECK(infer_tree_scheme_b(dv({1})) == BinaryTree::node(w(1), w(2)));
}

TEST_CASE("ties break leftmost") {
  // Equal distances everywhere: scheme A splits first at the leftmost
  // boundary, yielding the right-branching spine.
  CHECK(infer_tree_scheme_a(dv({1, 1, 1})) ==
        baseline_tree(BaselineKind::RightBranching, 4));
}

TEST_CASE("tree_to_distances is the LCA height") {
  BinaryTree balanced = BinaryTree::node(BinaryTree::node(w(1), w(2)),
                                         BinaryTree::node(w(3), w(4)));
  CHECK(tree_to_distances(balanced) == dv({1, 2, 1}));
  CHECK(tree_to_distances(BinaryTree::node(w(1), w(2))) == dv({1}));
  BinaryTree nested = BinaryTree::node(
      w(1), BinaryTree::node(BinaryTree::node(w(2), w(3)), w(4)));
  CHECK(tree_to_distances(nested) == dv({3, 1, 2}));
}

TEST_CASE("composition order merges lowest distance first") {
  BinaryTree nested = BinaryTree::node(
      w(1), BinaryTree::node(BinaryTree::node(w(2), w(3)), w(4)));
  CHECK(composition_order(nested, dv({3, 1, 2})).steps == std::vector<int>{2, 2, 1});

  CHECK(composition_order(BinaryTree::node(w(1), w(2)), dv({1})).steps ==
        std::vector<int>{1});

  BinaryTree balanced = BinaryTree::node(BinaryTree::node(w(1), w(2)),
                                         BinaryTree::node(w(3), w(4)));
  CHECK(composition_order(balanced, dv({1, 2, 1})).steps ==
        std::vector<int>{1, 2, 1});

  CHECK_THROWS_AS(composition_order(balanced, dv({1, 2})), DataError);
}

TEST_CASE("order_to_tree replays merges") {
  CHECK(order_to_tree(CompositionSequence{{2, 2, 1}}, 4) ==
        BinaryTree::node(w(1), BinaryTree::node(BinaryTree::node(w(2), w(3)), w(4))));
  CHECK(order_to_tree(CompositionSequence{{1}}, 2) == BinaryTree::node(w(1), w(2)));
  CHECK_THROWS_AS(order_to_tree(CompositionSequence{{5, 1}}, 3), DataError);
  CHECK_THROWS_AS(validate_composition(CompositionSequence{{5, 1}}, 3), DataError);
}

TEST_CASE("round-trips over random trees") {
  Rng rng(101);
  for (int iter = 0; iter < 400; ++iter) {
    int n = 2 + static_cast<int>(rng.below(11));
    BinaryTree t = testutil::random_binary_tree(n, rng);
    DistanceVector d = tree_to_distances(t);
    CHECK(infer_tree_scheme_a(d) == t);
    CompositionSequence order = composition_order(t, d);
    validate_composition(order, n);
    CHECK(order_to_tree(order, n) == t);
  }
}

TEST_CASE("monotone distance transforms do not change the trees") {
  Rng rng(55);
  for (int iter = 0; iter < 200; ++iter) {
    int n = 2 + static_cast<int>(rng.below(9));
    DistanceVector d(n - 1);
    for (int i = 0; i < n - 1; ++i) d[i] = rng.uniform(-2.0, 2.0);
    DistanceVector affine = (3.0 * d).array() + 1.0;
    DistanceVector cubed = d.array().cube();
    CHECK(infer_tree_scheme_a(d) == infer_tree_scheme_a(affine));
    CHECK(infer_tree_scheme_a(d) == infer_tree_scheme_a(cubed));
    CHECK(infer_tree_scheme_b(d) == infer_tree_scheme_b(affine));
    CHECK(infer_tree_scheme_b(d) == infer_tree_scheme_b(cubed));
  }
}

TEST_CASE("branching extremes") {
  Rng rng(77);
  for (int n : {2, 3, 5, 8, 12}) {
    DistanceVector dec(n - 1), inc(n - 1);
    for (int i = 0; i < n - 1; ++i) {
      dec[i] = static_cast<double>(n - i);
      inc[i] = static_cast<double>(i + 1);
    }
    CHECK(infer_tree_scheme_a(dec) == baseline_tree(BaselineKind::RightBranching, n));
    CHECK(infer_tree_scheme_b(dec) == baseline_tree(BaselineKind::RightBranching, n));
    CHECK(infer_tree_scheme_a(inc) == baseline_tree(BaselineKind::LeftBranching, n));
  }
  (void)rng;
}

namespace {

// Scheme B's structural bias: walk the output the way the recursion built
// it. A region node whose right part spans two or more tokens must carry the
// forced (token, remainder) shape, and the remainder is itself a region.
void check_bias(const BinaryTree& region) {
  if (region.is_leaf()) return;
  check_bias(region.left());
  if (region.right().is_leaf()) return;
  CHECK(region.right().left().is_leaf());
  check_bias(region.right().right());
}

}  // namespace

TEST_CASE("scheme B right-branching bias holds on random vectors") {
  Rng rng(303);
  for (int iter = 0; iter < 300; ++iter) {
    int n = 2 + static_cast<int>(rng.below(11));
    DistanceVector d(n - 1);
    for (int i = 0; i < n - 1; ++i) d[i] = rng.uniform(-1.0, 1.0);
    check_bias(infer_tree_scheme_b(d));
  }
}

TEST_CASE("non-finite distances are rejected") {
  DistanceVector bad(2);
  bad[0] = 1.0;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(infer_tree_scheme_a(bad), DataError);
}
