#include "uparse/distance.hpp"

#include <cmath>
#include <limits>

#include "uparse/errors.hpp"

namespace uparse {

namespace {

std::vector<std::string> placeholder_words(int n) {
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) words.push_back("w" + std::to_string(i));
  return words;
}

void check_finite(const DistanceVector& d) {
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw DataError("distance vector has a non-finite value at position " +
                      std::to_string(i + 1));
    }
  }
}

// Split point with the largest distance among boundaries lo..hi-1 (0-based,
// boundary j sits between tokens j and j+1). Leftmost wins ties.
int argmax_boundary(const DistanceVector& d, int lo, int hi) {
  int best = lo;
  for (int j = lo + 1; j <= hi - 1; ++j) {
    if (d[j] > d[best]) best = j;
  }
  return best;
}

BinaryTree scheme_a(const DistanceVector& d, const std::vector<Token>& toks,
                    int lo, int hi) {
  if (lo == hi) return BinaryTree::leaf(toks[static_cast<std::size_t>(lo)]);
  int j = argmax_boundary(d, lo, hi);
  return BinaryTree::node(scheme_a(d, toks, lo, j), scheme_a(d, toks, j + 1, hi));
}

BinaryTree scheme_b(const DistanceVector& d, const std::vector<Token>& toks,
                    int lo, int hi) {
  if (lo == hi) return BinaryTree::leaf(toks[static_cast<std::size_t>(lo)]);
  int j = argmax_boundary(d, lo, hi);
  BinaryTree left = scheme_b(d, toks, lo, j);
  BinaryTree right;
  if (j + 1 == hi) {
    right = BinaryTree::leaf(toks[static_cast<std::size_t>(hi)]);
  } else {
    // Forced singleton split of the right part, regardless of distances.
    right = BinaryTree::node(BinaryTree::leaf(toks[static_cast<std::size_t>(j + 1)]),
                             scheme_b(d, toks, j + 2, hi));
  }
  return BinaryTree::node(std::move(left), std::move(right));
}

std::vector<Token> tokens_for(const DistanceVector& d,
                              const std::vector<std::string>& words) {
  int n = static_cast<int>(d.size()) + 1;
  if (static_cast<int>(words.size()) != n) {
    throw DataError("distance vector of length " + std::to_string(d.size()) +
                    " does not fit a sentence of " +
                    std::to_string(words.size()) + " tokens");
  }
  return make_tokens(words);
}

}  // namespace

BinaryTree infer_tree_scheme_a(const DistanceVector& d,
                               const std::vector<std::string>& words) {
  check_finite(d);
  std::vector<Token> toks = tokens_for(d, words);
  return scheme_a(d, toks, 0, static_cast<int>(toks.size()) - 1);
}

BinaryTree infer_tree_scheme_a(const DistanceVector& d) {
  return infer_tree_scheme_a(d, placeholder_words(static_cast<int>(d.size()) + 1));
}

BinaryTree infer_tree_scheme_b(const DistanceVector& d,
                               const std::vector<std::string>& words) {
  check_finite(d);
  std::vector<Token> toks = tokens_for(d, words);
  return scheme_b(d, toks, 0, static_cast<int>(toks.size()) - 1);
}

BinaryTree infer_tree_scheme_b(const DistanceVector& d) {
  return infer_tree_scheme_b(d, placeholder_words(static_cast<int>(d.size()) + 1));
}

namespace {

// Fills d with LCA heights and returns the subtree height. next counts leaves
// in traversal order; the boundary between a node's children gets the node's
// height.
int heights_to_distances(const BinaryTree& t, int& next, DistanceVector& d) {
  if (t.is_leaf()) {
    ++next;
    return 0;
  }
  int hl = heights_to_distances(t.left(), next, d);
  int boundary = next - 1;  // between the last leaf of left and first of right
  int hr = heights_to_distances(t.right(), next, d);
  int h = 1 + std::max(hl, hr);
  d[boundary] = static_cast<double>(h);
  return h;
}

}  // namespace

DistanceVector tree_to_distances(const BinaryTree& tree) {
  int n = tree.leaf_count();
  DistanceVector d(n - 1 > 0 ? n - 1 : 0);
  int next = 0;
  heights_to_distances(tree, next, d);
  return d;
}

void validate_composition(const CompositionSequence& seq, int n) {
  if (static_cast<int>(seq.steps.size()) != n - 1) {
    throw DataError("composition sequence of " + std::to_string(seq.steps.size()) +
                    " steps does not fit " + std::to_string(n) + " tokens");
  }
  for (std::size_t j = 0; j < seq.steps.size(); ++j) {
    int nodes = n - static_cast<int>(j);
    if (seq.steps[j] < 1 || seq.steps[j] > nodes - 1) {
      throw DataError("composition step " + std::to_string(j + 1) +
                      " picks position " + std::to_string(seq.steps[j]) +
                      " out of 1.." + std::to_string(nodes - 1));
    }
  }
}

namespace {

// Flat view of the tree for the scheduling simulation.
struct FlatNode {
  int left = -1;
  int right = -1;
  int parent = -1;
  int start = 0;  // 0-based leaf interval
  int end = 0;
};

int flatten(const BinaryTree& t, std::vector<FlatNode>& nodes, int& next_leaf) {
  int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (t.is_leaf()) {
    nodes[static_cast<std::size_t>(id)].start = next_leaf;
    nodes[static_cast<std::size_t>(id)].end = next_leaf;
    ++next_leaf;
    return id;
  }
  int l = flatten(t.left(), nodes, next_leaf);
  int r = flatten(t.right(), nodes, next_leaf);
  nodes[static_cast<std::size_t>(id)].left = l;
  nodes[static_cast<std::size_t>(id)].right = r;
  nodes[static_cast<std::size_t>(id)].parent = -1;
  nodes[static_cast<std::size_t>(l)].parent = id;
  nodes[static_cast<std::size_t>(r)].parent = id;
  nodes[static_cast<std::size_t>(id)].start = nodes[static_cast<std::size_t>(l)].start;
  nodes[static_cast<std::size_t>(id)].end = nodes[static_cast<std::size_t>(r)].end;
  return id;
}

}  // namespace

CompositionSequence composition_order(const BinaryTree& tree,
                                      const DistanceVector& d) {
  int n = tree.leaf_count();
  if (static_cast<int>(d.size()) != n - 1) {
    throw DataError("composition_order: distance vector of length " +
                    std::to_string(d.size()) + " does not match a tree with " +
                    std::to_string(n) + " leaves");
  }
  check_finite(d);

  std::vector<FlatNode> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * n));
  int next_leaf = 0;
  flatten(tree, nodes, next_leaf);

  // Current assembled roots in left-to-right order, initially the leaves.
  std::vector<int> current;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].left < 0) current.push_back(static_cast<int>(i));
  }

  CompositionSequence seq;
  seq.steps.reserve(static_cast<std::size_t>(n - 1));
  for (int step = 0; step < n - 1; ++step) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < current.size(); ++i) {
      const FlatNode& a = nodes[static_cast<std::size_t>(current[i])];
      const FlatNode& b = nodes[static_cast<std::size_t>(current[i + 1])];
      if (a.parent < 0 || a.parent != b.parent) continue;
      double dist = d[a.end];  // boundary between the siblings
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) throw DataError("composition_order: tree is not assemblable");
    seq.steps.push_back(best + 1);
    int parent = nodes[static_cast<std::size_t>(current[static_cast<std::size_t>(best)])].parent;
    current[static_cast<std::size_t>(best)] = parent;
    current.erase(current.begin() + best + 1);
  }
  return seq;
}

BinaryTree order_to_tree(const CompositionSequence& seq,
                         const std::vector<std::string>& words) {
  int n = static_cast<int>(words.size());
  if (n < 1) throw DataError("order_to_tree: empty sentence");
  std::vector<BinaryTree> current;
  for (const Token& t : make_tokens(words)) current.push_back(BinaryTree::leaf(t));
  for (std::size_t j = 0; j < seq.steps.size(); ++j) {
    int pos = seq.steps[j];
    if (pos < 1 || pos > static_cast<int>(current.size()) - 1) {
      throw DataError("order_to_tree: step " + std::to_string(j + 1) +
                      " position " + std::to_string(pos) + " out of range");
    }
    std::size_t i = static_cast<std::size_t>(pos - 1);
    current[i] = BinaryTree::node(current[i], current[i + 1]);
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  }
  if (current.size() != 1) {
    throw DataError("order_to_tree: sequence leaves " +
                    std::to_string(current.size()) + " unassembled nodes");
  }
  return current[0];
}

BinaryTree order_to_tree(const CompositionSequence& seq, int n) {
  if (n < 1) throw DataError("order_to_tree: n must be >= 1");
  return order_to_tree(seq, placeholder_words(n));
}

}  // namespace uparse
