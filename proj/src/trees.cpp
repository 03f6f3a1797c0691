#include "uparse/trees.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "uparse/errors.hpp"

namespace uparse {

std::vector<Token> make_tokens(const std::vector<std::string>& words) {
  std::vector<Token> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.push_back(Token{words[i], static_cast<int>(i + 1)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// BinaryTree

struct BinaryTree::Impl {
  Token token;  // leaves only
  BinaryTree left;
  BinaryTree right;
  int leaves = 1;
  bool is_leaf = true;
};

BinaryTree BinaryTree::leaf(Token token) {
  auto impl = std::make_shared<Impl>();
  impl->token = std::move(token);
  return BinaryTree(std::move(impl));
}

BinaryTree BinaryTree::node(BinaryTree left, BinaryTree right) {
  if (!left.valid() || !right.valid()) {
    throw DataError("BinaryTree::node: child is empty");
  }
  auto impl = std::make_shared<Impl>();
  impl->is_leaf = false;
  impl->leaves = left.leaf_count() + right.leaf_count();
  impl->left = std::move(left);
  impl->right = std::move(right);
  return BinaryTree(std::move(impl));
}

bool BinaryTree::is_leaf() const { return impl_->is_leaf; }
const Token& BinaryTree::token() const { return impl_->token; }
const BinaryTree& BinaryTree::left() const { return impl_->left; }
const BinaryTree& BinaryTree::right() const { return impl_->right; }
int BinaryTree::leaf_count() const { return impl_->leaves; }

std::vector<Token> BinaryTree::fringe() const {
  std::vector<Token> out;
  out.reserve(static_cast<std::size_t>(leaf_count()));
  std::function<void(const BinaryTree&)> walk = [&](const BinaryTree& t) {
    if (t.is_leaf()) {
      out.push_back(t.token());
    } else {
      walk(t.left());
      walk(t.right());
    }
  };
  walk(*this);
  return out;
}

bool operator==(const BinaryTree& a, const BinaryTree& b) {
  if (a.impl_ == b.impl_) return true;
  if (!a.valid() || !b.valid()) return false;
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.token() == b.token();
  return a.left() == b.left() && a.right() == b.right();
}

// ---------------------------------------------------------------------------
// LabeledTree

struct LabeledTree::Impl {
  Token token;  // leaves only
  std::string label;
  std::vector<LabeledTree> children;
  int leaves = 1;
  bool is_leaf = true;
};

LabeledTree LabeledTree::leaf(Token token) {
  auto impl = std::make_shared<Impl>();
  impl->token = std::move(token);
  return LabeledTree(std::move(impl));
}

LabeledTree LabeledTree::node(std::string label,
                              std::vector<LabeledTree> children) {
  if (label.empty()) throw DataError("LabeledTree::node: empty label");
  if (children.empty()) throw DataError("LabeledTree::node: no children");
  auto impl = std::make_shared<Impl>();
  impl->is_leaf = false;
  impl->label = std::move(label);
  impl->leaves = 0;
  for (const auto& c : children) {
    if (!c.valid()) throw DataError("LabeledTree::node: child is empty");
    impl->leaves += c.leaf_count();
  }
  impl->children = std::move(children);
  return LabeledTree(std::move(impl));
}

bool LabeledTree::is_leaf() const { return impl_->is_leaf; }
const Token& LabeledTree::token() const { return impl_->token; }
const std::string& LabeledTree::label() const { return impl_->label; }
const std::vector<LabeledTree>& LabeledTree::children() const {
  return impl_->children;
}
int LabeledTree::leaf_count() const { return impl_->leaves; }

std::vector<Token> LabeledTree::fringe() const {
  std::vector<Token> out;
  out.reserve(static_cast<std::size_t>(leaf_count()));
  std::function<void(const LabeledTree&)> walk = [&](const LabeledTree& t) {
    if (t.is_leaf()) {
      out.push_back(t.token());
    } else {
      for (const auto& c : t.children()) walk(c);
    }
  };
  walk(*this);
  return out;
}

bool operator==(const LabeledTree& a, const LabeledTree& b) {
  if (a.impl_ == b.impl_) return true;
  if (!a.valid() || !b.valid()) return false;
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.token() == b.token();
  if (a.label() != b.label()) return false;
  if (a.children().size() != b.children().size()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i) {
    if (!(a.children()[i] == b.children()[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// PTB bracket parsing

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
bool is_token_char(char c) { return !is_ws(c) && c != '(' && c != ')'; }

class PtbParser {
 public:
  explicit PtbParser(std::string_view text) : text_(text) {}

  LabeledTree parse() {
    skip_ws();
    if (at_end()) throw PtbParseError("empty input", pos_);
    LabeledTree tree = parse_item();
    skip_ws();
    if (!at_end()) throw PtbParseError("trailing content", pos_);
    return tree;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  void skip_ws() {
    while (!at_end() && is_ws(peek())) ++pos_;
  }

  std::string read_word() {
    std::size_t begin = pos_;
    while (!at_end() && is_token_char(peek())) ++pos_;
    return std::string(text_.substr(begin, pos_ - begin));
  }

  LabeledTree parse_item() {
    if (peek() == '(') return parse_node();
    Token tok{read_word(), ++next_index_};
    return LabeledTree::leaf(std::move(tok));
  }

  LabeledTree parse_node() {
    std::size_t open = pos_;
    ++pos_;  // consume '('
    skip_ws();
    if (at_end()) throw PtbParseError("unbalanced brackets", pos_);
    std::string label;
    if (is_token_char(peek())) label = read_word();

    std::vector<LabeledTree> children;
    for (;;) {
      skip_ws();
      if (at_end()) throw PtbParseError("unbalanced brackets", pos_);
      if (peek() == ')') {
        ++pos_;
        break;
      }
      children.push_back(parse_item());
    }

    if (children.empty()) throw PtbParseError("empty constituent", open);
    if (label.empty()) {
      // PTB root convention: "( (S ...) )" wraps the real tree.
      if (children.size() == 1 && !children[0].is_leaf()) return children[0];
      throw PtbParseError("constituent without label", open);
    }
    return LabeledTree::node(std::move(label), std::move(children));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int next_index_ = 0;
};

}  // namespace

LabeledTree parse_ptb(std::string_view text) { return PtbParser(text).parse(); }

// ---------------------------------------------------------------------------
// Serialization

namespace {

void serialize_to(const LabeledTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token().surface;
    return;
  }
  out += '(';
  out += t.label();
  for (const auto& c : t.children()) {
    out += ' ';
    serialize_to(c, out);
  }
  out += ')';
}

void serialize_to(const BinaryTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token().surface;
    return;
  }
  out += "(X ";
  serialize_to(t.left(), out);
  out += ' ';
  serialize_to(t.right(), out);
  out += ')';
}

}  // namespace

std::string serialize(const LabeledTree& tree) {
  std::string out;
  serialize_to(tree, out);
  return out;
}

std::string serialize(const BinaryTree& tree) {
  std::string out;
  serialize_to(tree, out);
  return out;
}

// ---------------------------------------------------------------------------
// Spans

namespace {

// Returns the span of the subtree rooted at t, assigning leaf positions in
// traversal order starting at next.
template <class Tree, class Children>
Span collect_spans(const Tree& t, int& next, std::set<Span>& out,
                   Children children) {
  if (t.is_leaf()) {
    ++next;
    return Span{next, next};
  }
  Span span{next + 1, 0};
  for (const Tree* c : children(t)) {
    span.end = collect_spans(*c, next, out, children).end;
  }
  if (span.length() >= 2) out.insert(span);
  return span;
}

}  // namespace

std::set<Span> spans(const BinaryTree& tree, bool include_root) {
  std::set<Span> out;
  if (!tree.valid()) return out;
  int next = 0;
  collect_spans(tree, next, out, [](const BinaryTree& t) {
    return std::vector<const BinaryTree*>{&t.left(), &t.right()};
  });
  if (!include_root) out.erase(Span{1, tree.leaf_count()});
  return out;
}

std::set<Span> spans(const LabeledTree& tree, bool include_root) {
  std::set<Span> out;
  if (!tree.valid()) return out;
  int next = 0;
  collect_spans(tree, next, out, [](const LabeledTree& t) {
    std::vector<const LabeledTree*> cs;
    cs.reserve(t.children().size());
    for (const auto& c : t.children()) cs.push_back(&c);
    return cs;
  });
  if (!include_root) out.erase(Span{1, tree.leaf_count()});
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

BaselineKind baseline_kind_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "lb" || lower == "left" || lower == "left-branching")
    return BaselineKind::LeftBranching;
  if (lower == "rb" || lower == "right" || lower == "right-branching")
    return BaselineKind::RightBranching;
  if (lower == "balanced" || lower == "balanced-tree")
    return BaselineKind::Balanced;
  throw UsageError("unknown baseline kind: " + std::string(name));
}

namespace {

BinaryTree balanced_over(const std::vector<Token>& toks, int lo, int hi) {
  if (lo == hi) return BinaryTree::leaf(toks[static_cast<std::size_t>(lo)]);
  int n = hi - lo + 1;
  int split = lo + (n + 1) / 2 - 1;  // left part gets ceil(n/2) tokens
  return BinaryTree::node(balanced_over(toks, lo, split),
                          balanced_over(toks, split + 1, hi));
}

}  // namespace

BinaryTree baseline_tree(BaselineKind kind, const std::vector<std::string>& words) {
  if (words.empty()) throw DataError("baseline_tree: empty sentence");
  std::vector<Token> toks = make_tokens(words);
  int n = static_cast<int>(toks.size());
  switch (kind) {
    case BaselineKind::LeftBranching: {
      BinaryTree t = BinaryTree::leaf(toks[0]);
      for (int i = 1; i < n; ++i) {
        t = BinaryTree::node(std::move(t),
                             BinaryTree::leaf(toks[static_cast<std::size_t>(i)]));
      }
      return t;
    }
    case BaselineKind::RightBranching: {
      BinaryTree t = BinaryTree::leaf(toks[static_cast<std::size_t>(n - 1)]);
      for (int i = n - 2; i >= 0; --i) {
        t = BinaryTree::node(BinaryTree::leaf(toks[static_cast<std::size_t>(i)]),
                             std::move(t));
      }
      return t;
    }
    case BaselineKind::Balanced:
      return balanced_over(toks, 0, n - 1);
  }
  throw UsageError("baseline_tree: bad kind");
}

BinaryTree baseline_tree(BaselineKind kind, int n) {
  if (n < 1) throw DataError("baseline_tree: n must be >= 1");
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) words.push_back("w" + std::to_string(i));
  return baseline_tree(kind, words);
}

// ---------------------------------------------------------------------------
// Punctuation stripping

namespace {

// Rebuilds the tree without punctuation leaves. Returns an invalid tree when
// everything below was pruned.
LabeledTree prune_punct(const LabeledTree& t,
                        const std::set<std::string>& punct, int& next) {
  if (t.is_leaf()) {
    if (punct.count(t.token().surface)) return LabeledTree();
    return LabeledTree::leaf(Token{t.token().surface, ++next});
  }
  std::vector<LabeledTree> kept;
  for (const auto& c : t.children()) {
    LabeledTree pc = prune_punct(c, punct, next);
    if (pc.valid()) kept.push_back(std::move(pc));
  }
  if (kept.empty()) return LabeledTree();
  return LabeledTree::node(t.label(), std::move(kept));
}

}  // namespace

StripResult strip_punctuation(const std::vector<std::string>& sentence,
                              const LabeledTree& gold,
                              const std::set<std::string>& punct) {
  std::vector<Token> fringe = gold.fringe();
  if (fringe.size() != sentence.size()) {
    throw DataError("strip_punctuation: sentence and tree fringe differ in length");
  }
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (fringe[i].surface != sentence[i]) {
      throw DataError("strip_punctuation: sentence and tree fringe disagree at token " +
                      std::to_string(i + 1));
    }
  }
  StripResult out;
  for (const auto& w : sentence) {
    if (!punct.count(w)) out.tokens.push_back(w);
  }
  if (out.tokens.empty()) {
    throw DataError("strip_punctuation: sentence is all punctuation");
  }
  int next = 0;
  out.tree = prune_punct(gold, punct, next);
  return out;
}

namespace {

BinaryTree prune_binary(const BinaryTree& t, const std::vector<bool>& drop,
                        int& pos, int& next) {
  if (t.is_leaf()) {
    int here = pos++;
    if (drop[static_cast<std::size_t>(here)]) return BinaryTree();
    return BinaryTree::leaf(Token{t.token().surface, ++next});
  }
  BinaryTree l = prune_binary(t.left(), drop, pos, next);
  BinaryTree r = prune_binary(t.right(), drop, pos, next);
  if (!l.valid()) return r;
  if (!r.valid()) return l;
  return BinaryTree::node(std::move(l), std::move(r));
}

}  // namespace

BinaryTree prune_leaves(const BinaryTree& tree, const std::vector<bool>& drop) {
  if (static_cast<int>(drop.size()) != tree.leaf_count()) {
    throw DataError("prune_leaves: mask length does not match fringe");
  }
  int pos = 0;
  int next = 0;
  BinaryTree out = prune_binary(tree, drop, pos, next);
  if (!out.valid()) throw DataError("prune_leaves: tree is empty after pruning");
  return out;
}

const std::set<std::string>& default_punctuation() {
  static const std::set<std::string> punct = {
      ".",  ",",  ";",  ":",    "!",    "?", "\"", "'",
      "``", "''", "-LRB-", "-RRB-", "(", ")", "-",  "--"};
  return punct;
}

// ---------------------------------------------------------------------------
// ASCII rendering

namespace {

template <class Tree, class Text, class Children>
void render_node(const Tree& t, const std::string& prefix, bool last, bool root,
                 std::string& out, Text text, Children children) {
  out += prefix;
  if (!root) out += last ? "`-- " : "|-- ";
  out += text(t);
  out += '\n';
  if (t.is_leaf()) return;
  std::string child_prefix = prefix;
  if (!root) child_prefix += last ? "    " : "|   ";
  auto cs = children(t);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    render_node(*cs[i], child_prefix, i + 1 == cs.size(), false, out, text,
                children);
  }
}

}  // namespace

std::string render_ascii(const LabeledTree& tree) {
  std::string out;
  render_node(
      tree, "", true, true, out,
      [](const LabeledTree& t) {
        return t.is_leaf() ? t.token().surface : t.label();
      },
      [](const LabeledTree& t) {
        std::vector<const LabeledTree*> cs;
        for (const auto& c : t.children()) cs.push_back(&c);
        return cs;
      });
  return out;
}

std::string render_ascii(const BinaryTree& tree) {
  std::string out;
  render_node(
      tree, "", true, true, out,
      [](const BinaryTree& t) -> std::string {
        return t.is_leaf() ? t.token().surface : "X";
      },
      [](const BinaryTree& t) {
        return std::vector<const BinaryTree*>{&t.left(), &t.right()};
      });
  return out;
}

}  // namespace uparse
