#pragma once

// Small probabilistic context-free grammars used as the desk-scale stand-in
// for a treebank plus an NLI corpus: sampled derivations give sentences with
// reference parses, and heuristically labeled sentence pairs give a
// trainable 3-way classification task.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uparse/io.hpp"
#include "uparse/rng.hpp"
#include "uparse/trees.hpp"

namespace uparse {

struct GrammarRule {
  std::vector<std::string> rhs;  // 1 or 2 symbols
  double prob = 0.0;
};

// Grammar file format: one rule per line, "LHS RHS [RHS2] PROB"; '#' starts
// a comment. Symbols that never appear as an LHS are terminals; binary rules
// must expand to nonterminals, terminals are produced by unary rules. The
// start symbol is the first LHS. Rule probabilities per LHS must sum to 1
// within 1e-9.
class SyntheticGrammar {
 public:
  static SyntheticGrammar from_text(const std::string& text);
  static SyntheticGrammar from_file(const std::string& path);

  const std::string& start() const { return start_; }
  bool is_terminal(const std::string& symbol) const {
    return rules_.find(symbol) == rules_.end();
  }

  // One derivation whose fringe length lands in [min_len, max_len];
  // resamples up to a fixed attempt budget, then fails.
  LabeledTree sample(Rng& rng, int min_len, int max_len) const;

  // Re-samples every terminal of the derivation from its preterminal's
  // lexical distribution, keeping the structure fixed.
  LabeledTree paraphrase(const LabeledTree& derivation, Rng& rng) const;

 private:
  LabeledTree expand(const std::string& symbol, Rng& rng, int depth, int& budget) const;
  const GrammarRule& pick_rule(const std::string& lhs, Rng& rng) const;

  std::string start_;
  std::map<std::string, std::vector<GrammarRule>> rules_;
};

struct SyntheticData {
  std::vector<std::vector<std::string>> sentences;
  std::vector<LabeledTree> gold;
  std::vector<NliPairText> pairs;
};

// `count` sentences with derivations, plus `pair_count` NLI-style pairs:
// even pairs are (sentence, paraphrase) labeled entailment; odd pairs are
// random cross pairs labeled neutral or contradiction by lexical overlap.
SyntheticData generate_synthetic(const SyntheticGrammar& grammar, int count,
                                 int pair_count, std::uint64_t seed,
                                 int min_len, int max_len);

}  // namespace uparse
