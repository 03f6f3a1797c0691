#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "uparse/trees.hpp"

namespace uparse {

// Per-boundary syntactic distances. Entry j (0-based) belongs to the boundary
// between tokens j+1 and j+2 (1-based), so a sentence of N tokens carries
// N-1 values.
using DistanceVector = Eigen::VectorXd;

// Ordered merge positions driving pyramid composition. Step j (0-based)
// merges the pair at 1-based position steps[j] of the current node sequence,
// so steps[j] must lie in 1..N-1-j.
struct CompositionSequence {
  std::vector<int> steps;

  friend bool operator==(const CompositionSequence&,
                         const CompositionSequence&) = default;
};

void validate_composition(const CompositionSequence& seq, int n);

// Recursive max split: the region is cut at its largest distance (leftmost on
// ties) and both halves are parsed recursively.
BinaryTree infer_tree_scheme_a(const DistanceVector& d,
                               const std::vector<std::string>& words);
BinaryTree infer_tree_scheme_a(const DistanceVector& d);

// Right-branching-biased variant: after the max split, a right part of two or
// more words is always cut into its first word and the remainder, regardless
// of the distances; recursion continues with the same rule.
BinaryTree infer_tree_scheme_b(const DistanceVector& d,
                               const std::vector<std::string>& words);
BinaryTree infer_tree_scheme_b(const DistanceVector& d);

// Canonical distances of a tree: entry j is the height of the lowest common
// ancestor of tokens j+1 and j+2, with leaf height 0 and node height
// 1 + max(child heights). Exact inverse of scheme A.
DistanceVector tree_to_distances(const BinaryTree& tree);

// Unambiguous composition order for a tree: at every step, among the internal
// nodes whose children are both assembled, the one with the smallest boundary
// distance merges first (leftmost on ties).
CompositionSequence composition_order(const BinaryTree& tree,
                                      const DistanceVector& d);

// Replays a composition sequence over n fresh leaves.
BinaryTree order_to_tree(const CompositionSequence& seq, int n);
BinaryTree order_to_tree(const CompositionSequence& seq,
                         const std::vector<std::string>& words);

}  // namespace uparse
