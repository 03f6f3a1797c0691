#include "uparse/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "uparse/errors.hpp"

namespace uparse {

namespace {

constexpr int kMaxDepth = 40;
constexpr int kSampleAttempts = 10000;

struct ExpansionTooDeep {};

}  // namespace

SyntheticGrammar SyntheticGrammar::from_file(const std::string& path) {
  return from_text(read_file(path));
}

SyntheticGrammar SyntheticGrammar::from_text(const std::string& text) {
  SyntheticGrammar g;
  std::istringstream ss(text);
  std::string line;
  long lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    if (toks.size() < 3 || toks.size() > 4) {
      throw DataError("grammar line " + std::to_string(lineno) +
                      ": expected 'LHS RHS [RHS2] PROB'");
    }
    GrammarRule rule;
    const std::string& prob_tok = toks.back();
    auto r = std::from_chars(prob_tok.data(), prob_tok.data() + prob_tok.size(),
                             rule.prob);
    if (r.ec != std::errc() || r.ptr != prob_tok.data() + prob_tok.size() ||
        rule.prob < 0.0) {
      throw DataError("grammar line " + std::to_string(lineno) +
                      ": bad probability '" + prob_tok + "'");
    }
    rule.rhs.assign(toks.begin() + 1, toks.end() - 1);
    if (g.rules_.empty()) g.start_ = toks[0];
    g.rules_[toks[0]].push_back(std::move(rule));
  }
  if (g.rules_.empty()) throw DataError("grammar has no rules");

  for (const auto& [lhs, rules] : g.rules_) {
    double total = 0.0;
    for (const auto& rule : rules) {
      total += rule.prob;
      if (rule.rhs.size() == 2) {
        for (const auto& sym : rule.rhs) {
          if (g.is_terminal(sym)) {
            throw DataError("grammar: binary rule for " + lhs +
                            " expands to terminal '" + sym + "'");
          }
        }
      }
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw DataError("grammar: probabilities for " + lhs + " sum to " +
                      format_double(total) + ", expected 1");
    }
  }
  return g;
}

const GrammarRule& SyntheticGrammar::pick_rule(const std::string& lhs,
                                               Rng& rng) const {
  const auto& rules = rules_.at(lhs);
  double u = rng.uniform();
  double acc = 0.0;
  for (const auto& rule : rules) {
    acc += rule.prob;
    if (u < acc) return rule;
  }
  return rules.back();
}

LabeledTree SyntheticGrammar::expand(const std::string& symbol, Rng& rng,
                                     int depth, int& budget) const {
  if (depth > kMaxDepth || --budget < 0) throw ExpansionTooDeep{};
  const GrammarRule& rule = pick_rule(symbol, rng);
  std::vector<LabeledTree> children;
  children.reserve(rule.rhs.size());
  for (const auto& sym : rule.rhs) {
    if (is_terminal(sym)) {
      children.push_back(LabeledTree::leaf(Token{sym, 0}));
    } else {
      children.push_back(expand(sym, rng, depth + 1, budget));
    }
  }
  return LabeledTree::node(symbol, std::move(children));
}

namespace {

// Rebuilds the tree with fringe indices 1..N.
LabeledTree renumber(const LabeledTree& t, int& next) {
  if (t.is_leaf()) return LabeledTree::leaf(Token{t.token().surface, ++next});
  std::vector<LabeledTree> children;
  children.reserve(t.children().size());
  for (const auto& c : t.children()) children.push_back(renumber(c, next));
  return LabeledTree::node(t.label(), std::move(children));
}

}  // namespace

LabeledTree SyntheticGrammar::sample(Rng& rng, int min_len, int max_len) const {
  if (min_len < 1 || max_len < min_len) {
    throw DataError("grammar sample: bad length bounds");
  }
  for (int attempt = 0; attempt < kSampleAttempts; ++attempt) {
    try {
      int budget = 4096;
      LabeledTree t = expand(start_, rng, 0, budget);
      int n = t.leaf_count();
      if (n < min_len || n > max_len) continue;
      int next = 0;
      return renumber(t, next);
    } catch (const ExpansionTooDeep&) {
      continue;
    }
  }
  throw DataError("grammar sample: no derivation of length " +
                  std::to_string(min_len) + ".." + std::to_string(max_len) +
                  " after " + std::to_string(kSampleAttempts) + " attempts");
}

LabeledTree SyntheticGrammar::paraphrase(const LabeledTree& derivation,
                                         Rng& rng) const {
  if (derivation.is_leaf()) {
    throw DataError("paraphrase: bare leaf has no preterminal");
  }
  // A preterminal node covers exactly one leaf child.
  if (derivation.children().size() == 1 && derivation.children()[0].is_leaf()) {
    const auto& rules = rules_.at(derivation.label());
    double u = rng.uniform();
    double acc = 0.0;
    const GrammarRule* chosen = &rules.back();
    for (const auto& rule : rules) {
      acc += rule.prob;
      if (u < acc) {
        chosen = &rule;
        break;
      }
    }
    // Keep the original word if the drawn rule is not lexical.
    std::string word = (chosen->rhs.size() == 1 && is_terminal(chosen->rhs[0]))
                           ? chosen->rhs[0]
                           : derivation.children()[0].token().surface;
    return LabeledTree::node(
        derivation.label(),
        {LabeledTree::leaf(Token{word, derivation.children()[0].token().index})});
  }
  std::vector<LabeledTree> children;
  children.reserve(derivation.children().size());
  for (const auto& c : derivation.children()) {
    if (c.is_leaf()) {
      children.push_back(c);
    } else {
      children.push_back(paraphrase(c, rng));
    }
  }
  return LabeledTree::node(derivation.label(), std::move(children));
}

namespace {

std::vector<std::string> fringe_words(const LabeledTree& t) {
  std::vector<std::string> out;
  for (const Token& tok : t.fringe()) out.push_back(tok.surface);
  return out;
}

double lexical_overlap(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& w : sa) common += sb.count(w);
  std::size_t denom = std::min(sa.size(), sb.size());
  return denom == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(denom);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticGrammar& grammar, int count,
                                 int pair_count, std::uint64_t seed,
                                 int min_len, int max_len) {
  if (count < 0 || pair_count < 0) throw DataError("gen-synthetic: bad counts");
  if (pair_count > 0 && count < 2) {
    throw DataError("gen-synthetic: pairs need at least 2 sentences");
  }
  Rng rng(seed);
  SyntheticData data;
  data.sentences.reserve(static_cast<std::size_t>(count));
  data.gold.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    LabeledTree t = grammar.sample(rng, min_len, max_len);
    data.sentences.push_back(fringe_words(t));
    data.gold.push_back(std::move(t));
  }
  for (int i = 0; i < pair_count; ++i) {
    NliPairText pair;
    if (i % 2 == 0) {
      // Same-structure paraphrase: entailment.
      std::size_t k = rng.below(data.gold.size());
      pair.label = 0;
      pair.premise = data.sentences[k];
      pair.hypothesis = fringe_words(grammar.paraphrase(data.gold[k], rng));
    } else {
      std::size_t a = rng.below(data.gold.size());
      std::size_t b = rng.below(data.gold.size());
      if (b == a) b = (a + 1) % data.gold.size();
      pair.premise = data.sentences[a];
      pair.hypothesis = data.sentences[b];
      pair.label = lexical_overlap(pair.premise, pair.hypothesis) >= 0.3 ? 1 : 2;
    }
    data.pairs.push_back(std::move(pair));
  }
  return data;
}

}  // namespace uparse
