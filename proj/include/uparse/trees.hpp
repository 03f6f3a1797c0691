#pragma once

#include <compare>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace uparse {

// One word of a sentence. Indices are 1-based and consecutive within a
// sentence.
struct Token {
  std::string surface;
  int index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

std::vector<Token> make_tokens(const std::vector<std::string>& words);

// Contiguous token interval, 1-based inclusive on both ends.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Unlabeled binary parse. Immutable; copies share structure.
class BinaryTree {
 public:
  BinaryTree() = default;

  static BinaryTree leaf(Token token);
  static BinaryTree node(BinaryTree left, BinaryTree right);

  bool valid() const { return impl_ != nullptr; }
  bool is_leaf() const;
  const Token& token() const;
  const BinaryTree& left() const;
  const BinaryTree& right() const;
  int leaf_count() const;
  std::vector<Token> fringe() const;

  friend bool operator==(const BinaryTree& a, const BinaryTree& b);
  friend bool operator!=(const BinaryTree& a, const BinaryTree& b) {
    return !(a == b);
  }

 private:
  struct Impl;
  explicit BinaryTree(std::shared_ptr<const Impl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// N-ary labeled parse, as read from reference treebanks. Immutable.
class LabeledTree {
 public:
  LabeledTree() = default;

  static LabeledTree leaf(Token token);
  static LabeledTree node(std::string label, std::vector<LabeledTree> children);

  bool valid() const { return impl_ != nullptr; }
  bool is_leaf() const;
  const Token& token() const;
  const std::string& label() const;
  const std::vector<LabeledTree>& children() const;
  int leaf_count() const;
  std::vector<Token> fringe() const;

  friend bool operator==(const LabeledTree& a, const LabeledTree& b);
  friend bool operator!=(const LabeledTree& a, const LabeledTree& b) {
    return !(a == b);
  }

 private:
  struct Impl;
  explicit LabeledTree(std::shared_ptr<const Impl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// Parses one bracketed tree, e.g. "(S (NP the dog) (VP ran))". A bare token
// parses as a single leaf. Throws PtbParseError with the byte offset on
// unbalanced brackets, empty constituents, or empty input.
LabeledTree parse_ptb(std::string_view text);

std::string serialize(const LabeledTree& tree);
// Binary trees serialize with the placeholder label "X".
std::string serialize(const BinaryTree& tree);

// Constituent spans of length >= 2. The whole-sentence span is included only
// when include_root is set; single-token spans never appear.
std::set<Span> spans(const BinaryTree& tree, bool include_root);
std::set<Span> spans(const LabeledTree& tree, bool include_root);

enum class BaselineKind { LeftBranching, RightBranching, Balanced };

BaselineKind baseline_kind_from_string(std::string_view name);

// Left spine, right spine, or recursive ceil(n/2) split over placeholder
// tokens w1..wn (or the given words).
BinaryTree baseline_tree(BaselineKind kind, int n);
BinaryTree baseline_tree(BaselineKind kind, const std::vector<std::string>& words);

struct StripResult {
  std::vector<std::string> tokens;
  LabeledTree tree;
};

// Removes punctuation tokens from the sentence and prunes the matching
// leaves from the reference tree: emptied constituents are deleted, nodes
// left with a single child are kept as-is, and leaf indices are renumbered.
// Throws DataError if nothing remains.
StripResult strip_punctuation(const std::vector<std::string>& sentence,
                              const LabeledTree& gold,
                              const std::set<std::string>& punct);

// Drops the leaves at the flagged positions (0-based, aligned with the
// fringe) and collapses the emptied parents. Used to strip punctuation from
// predicted binary trees.
BinaryTree prune_leaves(const BinaryTree& tree, const std::vector<bool>& drop);

const std::set<std::string>& default_punctuation();

std::string render_ascii(const LabeledTree& tree);
std::string render_ascii(const BinaryTree& tree);

}  // namespace uparse
