#pragma once

// Test-only utilities: random tree generation and an independent
// brute-force span/metric oracle used to cross-check the eval module.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "uparse/rng.hpp"
#include "uparse/trees.hpp"

namespace testutil {

inline uparse::BinaryTree random_binary_subtree(int lo, int n, uparse::Rng& rng) {
  if (n == 1) {
    return uparse::BinaryTree::leaf(
        uparse::Token{"w" + std::to_string(lo), lo});
  }
  int left = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(n - 1)));
  return uparse::BinaryTree::node(random_binary_subtree(lo, left, rng),
                                  random_binary_subtree(lo + left, n - left, rng));
}

inline uparse::BinaryTree random_binary_tree(int n, uparse::Rng& rng) {
  return random_binary_subtree(1, n, rng);
}

// Oracle span enumeration: reads the stored 1-based token indices instead of
// counting leaves, and gathers each node's full index set.
template <class Tree, class ChildVisitor>
std::set<int> oracle_collect(const Tree& t, ChildVisitor children,
                             std::set<uparse::Span>& out) {
  if (t.is_leaf()) return {t.token().index};
  std::set<int> indices;
  for (const Tree* c : children(t)) {
    for (int i : oracle_collect(*c, children, out)) indices.insert(i);
  }
  if (indices.size() >= 2) {
    out.insert(uparse::Span{*indices.begin(), *indices.rbegin()});
  }
  return indices;
}

inline std::set<uparse::Span> oracle_spans(const uparse::BinaryTree& t,
                                           bool include_root) {
  std::set<uparse::Span> out;
  oracle_collect(t,
                 [](const uparse::BinaryTree& n) {
                   return std::vector<const uparse::BinaryTree*>{&n.left(),
                                                                 &n.right()};
                 },
                 out);
  if (!include_root) out.erase(uparse::Span{1, t.leaf_count()});
  return out;
}

inline std::set<uparse::Span> oracle_spans(const uparse::LabeledTree& t,
                                           bool include_root) {
  std::set<uparse::Span> out;
  oracle_collect(t,
                 [](const uparse::LabeledTree& n) {
                   std::vector<const uparse::LabeledTree*> cs;
                   for (const auto& c : n.children()) cs.push_back(&c);
                   return cs;
                 },
                 out);
  if (!include_root) out.erase(uparse::Span{1, t.leaf_count()});
  return out;
}

struct OracleF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

inline OracleF oracle_f(const std::set<uparse::Span>& pred,
                        const std::set<uparse::Span>& gold) {
  if (pred.empty() && gold.empty()) return OracleF{1.0, 1.0, 1.0};
  if (pred.empty() || gold.empty()) return OracleF{0.0, 0.0, 0.0};
  std::size_t match = 0;
  for (const auto& s : pred) match += gold.count(s);
  OracleF out;
  out.precision = static_cast<double>(match) / static_cast<double>(pred.size());
  out.recall = static_cast<double>(match) / static_cast<double>(gold.size());
  out.f = (out.precision + out.recall) > 0
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

}  // namespace testutil
