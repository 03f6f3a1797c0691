#pragma once

// Pyramid Tree-LSTM sentence encoder. Every step composes all adjacent node
// pairs, scores them against a trainable query vector, picks one position
// (sampled, argmax, or forced), and shrinks the sequence by one until a
// single root remains. Sampling uses straight-through Gumbel-Softmax: the
// forward pass keeps the discrete one-hot choice, the backward pass flows
// through the temperature-relaxed softmax.

#include <cstdint>
#include <string>
#include <vector>

#include "uparse/autodiff.hpp"
#include "uparse/distance.hpp"
#include "uparse/errors.hpp"
#include "uparse/nn.hpp"
#include "uparse/rng.hpp"
#include "uparse/trees.hpp"

namespace uparse {

struct TreeLstmConfig {
  int vocab_size = 0;
  int embed_dim = 16;
  int hidden_dim = 24;
  int classifier_hidden = 32;
  int num_labels = 3;        // entailment / neutral / contradiction
  double gamma_init = 0.5;   // relaxation temperature at the start of refinement
  bool learn_gamma = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab_size < 2) throw DataError("treelstm: vocab_size must be >= 2");
    if (embed_dim < 1 || hidden_dim < 1 || classifier_hidden < 1) {
      throw DataError("treelstm: dims must be >= 1");
    }
    if (!(gamma_init > 0)) throw DataError("treelstm: gamma must be > 0");
    if (num_labels < 2) throw DataError("treelstm: need >= 2 labels");
  }
};

enum class TreeMode { Sample, Argmax, Forced };

// Temperatures below this are clamped before the relaxed softmax so a
// learned gamma cannot collapse the exponent.
constexpr double kGammaFloor = 1e-6;

template <class Scalar>
struct StGumbelResultT {
  int action = 0;                      // selected candidate, 0-based
  ad::VarT<Scalar> relaxed;            // p-tilde
  ad::VarT<Scalar> straight_through;   // one-hot forward, relaxed backward
};

// Gumbel-max sampling over a probability vector (plain values, no tape).
// Ties break leftmost.
inline int gumbel_argmax(const Eigen::VectorXd& p, Rng& rng) {
  int best = 0;
  double best_z = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double z = std::log(std::max(p[i], 1e-20)) + rng.gumbel();
    if (z > best_z) {
      best_z = z;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Straight-through Gumbel-Softmax over a distribution already on the tape.
// noise_override injects fixed Gumbel noise (tests); forced_action pins the
// selected index without touching the relaxed path (tie-break probes).
template <class Scalar>
StGumbelResultT<Scalar> st_gumbel_sample(ad::TapeT<Scalar>& tape,
                                         ad::VarT<Scalar> p, ad::VarT<Scalar> gamma,
                                         Rng* rng,
                                         const Eigen::VectorXd* noise_override = nullptr,
                                         int forced_action = -1) {
  if (p.cols() != 1) throw ShapeError("st_gumbel_sample: p must be a column vector");
  Eigen::Index m = p.rows();
  Eigen::VectorXd noise(m);
  if (noise_override) {
    if (noise_override->size() != m) {
      throw ShapeError("st_gumbel_sample: noise length mismatch");
    }
    noise = *noise_override;
  } else {
    if (!rng) throw DataError("st_gumbel_sample: sampling needs an rng");
    for (Eigen::Index i = 0; i < m; ++i) noise[i] = rng->gumbel();
  }

  StGumbelResultT<Scalar> out;
  if (forced_action >= 0) {
    if (forced_action >= m) throw DataError("st_gumbel_sample: forced action out of range");
    out.action = forced_action;
  } else {
    int best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      double z = std::log(std::max(static_cast<double>(p.value()(i, 0)), 1e-20)) +
                 noise[i];
      if (z > best_z) {
        best_z = z;
        best = static_cast<int>(i);
      }
    }
    out.action = best;
  }

  ad::Mat<Scalar> noise_m(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) noise_m(i, 0) = static_cast<Scalar>(noise[i]);
  ad::VarT<Scalar> z =
      ad::add(ad::log(ad::clamp_min(p, Scalar(1e-20))), tape.constant(noise_m));
  ad::VarT<Scalar> inv_gamma =
      ad::reciprocal(ad::clamp_min(gamma, static_cast<Scalar>(kGammaFloor)));
  out.relaxed = ad::softmax(ad::matmul(z, inv_gamma));

  ad::Mat<Scalar> onehot = ad::Mat<Scalar>::Zero(m, 1);
  onehot(out.action, 0) = Scalar(1);
  out.straight_through = ad::add(tape.constant(onehot),
                                 ad::sub(out.relaxed, ad::detach(out.relaxed)));
  return out;
}

template <class Scalar>
struct EncodeResultT {
  ad::VarT<Scalar> sentence;                 // root hidden state
  BinaryTree tree;                           // structure actually built
  std::vector<ad::VarT<Scalar>> step_probs;  // p^(j) over the candidates
  std::vector<int> chosen;                   // 1-based merge positions
};

template <class Scalar>
struct ClassifyResultT {
  ad::VarT<Scalar> logits;
  ad::VarT<Scalar> probs;
};

template <class Scalar>
struct EncodeOptionsT {
  TreeMode mode = TreeMode::Argmax;
  const CompositionSequence* forced = nullptr;
  Rng* rng = nullptr;  // Sample mode
};

template <class Scalar>
class TreeLstmT {
 public:
  using ScalarType = Scalar;
  using Tape = ad::TapeT<Scalar>;
  using Var = ad::VarT<Scalar>;
  using Store = ad::ParamStoreT<Scalar>;
  using NodeState = ad::NodeStateT<Scalar>;

  explicit TreeLstmT(TreeLstmConfig cfg) : cfg_(cfg), params_(cfg.seed) {
    cfg_.validate();
    params_.add_embedding("tree.embed", cfg_.vocab_size, cfg_.embed_dim);
    params_.add_matrix("tree.leaf.w", 2 * cfg_.hidden_dim, cfg_.embed_dim);
    params_.add_bias("tree.leaf.b", 2 * cfg_.hidden_dim);
    params_.add_matrix("tree.comp.w", 5 * cfg_.hidden_dim, 2 * cfg_.hidden_dim);
    params_.add_bias("tree.comp.b", 5 * cfg_.hidden_dim);
    params_.add_matrix("tree.query", cfg_.hidden_dim, 1);
    params_.add_matrix("tree.cls.w1", cfg_.classifier_hidden, 4 * cfg_.hidden_dim);
    params_.add_bias("tree.cls.b1", cfg_.classifier_hidden);
    params_.add_matrix("tree.cls.w2", cfg_.num_labels, cfg_.classifier_hidden);
    params_.add_bias("tree.cls.b2", cfg_.num_labels);
    auto& gamma = params_.add_value(
        "tree.gamma",
        ad::Mat<Scalar>::Constant(1, 1, static_cast<Scalar>(cfg_.gamma_init)));
    gamma.trainable = cfg_.learn_gamma;
  }

  TreeLstmT(TreeLstmConfig cfg, Store&& params)
      : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    const auto& embed = params_.at("tree.embed").value;
    if (embed.rows() != cfg_.vocab_size || embed.cols() != cfg_.embed_dim ||
        params_.at("tree.query").value.rows() != cfg_.hidden_dim ||
        params_.at("tree.cls.w2").value.rows() != cfg_.num_labels) {
      throw DataError("treelstm: checkpoint does not match the configuration");
    }
    params_.at("tree.gamma").trainable = cfg_.learn_gamma;
  }

  const TreeLstmConfig& config() const { return cfg_; }
  Store& params() { return params_; }
  const Store& params() const { return params_; }
  double gamma() const {
    return static_cast<double>(params_.at("tree.gamma").value(0, 0));
  }

  // Binary Tree-LSTM cell: input, left-forget, right-forget, output, and
  // candidate preactivations from [h_l; h_r].
  NodeState compose(Tape& tape, const NodeState& left, const NodeState& right) const {
    Var w = tape.param("tree.comp.w");
    Var b = tape.param("tree.comp.b");
    Eigen::Index hd = cfg_.hidden_dim;
    Var pre = ad::affine(w, ad::concat_rows<Scalar>({left.h, right.h}), b);
    Var i = ad::sigmoid(ad::slice_rows(pre, 0, hd));
    Var fl = ad::sigmoid(ad::slice_rows(pre, hd, hd));
    Var fr = ad::sigmoid(ad::slice_rows(pre, 2 * hd, hd));
    Var o = ad::sigmoid(ad::slice_rows(pre, 3 * hd, hd));
    Var u = ad::tanh(ad::slice_rows(pre, 4 * hd, hd));
    Var c = ad::add(ad::add(ad::cmul(fl, left.c), ad::cmul(fr, right.c)),
                    ad::cmul(i, u));
    Var h = ad::cmul(o, ad::tanh(c));
    return {h, c};
  }

  NodeState leaf_state(Tape& tape, int id) const {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw DataError("treelstm: token id " + std::to_string(id) +
                      " outside vocabulary");
    }
    Var x = ad::lookup(tape.param("tree.embed"), id);
    Var pre = ad::affine(tape.param("tree.leaf.w"), x, tape.param("tree.leaf.b"));
    return {ad::slice_rows(pre, 0, cfg_.hidden_dim),
            ad::slice_rows(pre, cfg_.hidden_dim, cfg_.hidden_dim)};
  }

  // Softmax over q . h_i for the M-1 adjacent-pair candidates.
  Var score_candidates(Tape& tape, const std::vector<NodeState>& candidates) const {
    if (candidates.empty()) {
      throw DataError("score_candidates: need at least one candidate");
    }
    Var q = tape.param("tree.query");
    std::vector<Var> scores;
    scores.reserve(candidates.size());
    for (const NodeState& cand : candidates) scores.push_back(ad::dot(q, cand.h));
    return ad::softmax(ad::concat_rows(scores));
  }

  EncodeResultT<Scalar> encode_sentence(Tape& tape, const std::vector<int>& ids,
                                        const std::vector<std::string>& words,
                                        const EncodeOptionsT<Scalar>& opts) const {
    if (ids.empty()) throw DataError("encode_sentence: empty sentence");
    if (words.size() != ids.size()) {
      throw DataError("encode_sentence: words/ids length mismatch");
    }
    int n = static_cast<int>(ids.size());
    if (opts.mode == TreeMode::Forced) {
      if (!opts.forced) throw DataError("encode_sentence: forced mode needs a sequence");
      validate_composition(*opts.forced, n);
    }
    if (opts.mode == TreeMode::Sample && !opts.rng) {
      throw DataError("encode_sentence: sample mode needs an rng");
    }

    EncodeResultT<Scalar> out;
    std::vector<NodeState> nodes;
    std::vector<BinaryTree> trees;
    nodes.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      nodes.push_back(leaf_state(tape, ids[static_cast<std::size_t>(i)]));
      trees.push_back(BinaryTree::leaf(Token{words[static_cast<std::size_t>(i)], i + 1}));
    }

    Var gamma = tape.param("tree.gamma");
    for (int step = 0; nodes.size() > 1; ++step) {
      std::size_t m = nodes.size();
      std::vector<NodeState> candidates;
      candidates.reserve(m - 1);
      for (std::size_t k = 0; k + 1 < m; ++k) {
        candidates.push_back(compose(tape, nodes[k], nodes[k + 1]));
      }
      Var p = score_candidates(tape, candidates);
      out.step_probs.push_back(p);

      int pos;  // 0-based candidate index
      if (opts.mode == TreeMode::Forced) {
        pos = opts.forced->steps[static_cast<std::size_t>(step)] - 1;
      } else if (opts.mode == TreeMode::Argmax) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < p.rows(); ++i) {
          if (p.value()(i, 0) > p.value()(best, 0)) best = i;
        }
        pos = static_cast<int>(best);
      } else {
        StGumbelResultT<Scalar> sample = st_gumbel_sample(tape, p, gamma, opts.rng);
        pos = sample.action;
        mix_nodes(tape, nodes, candidates, sample.straight_through, pos);
        merge_trees(trees, pos);
        out.chosen.push_back(pos + 1);
        continue;
      }
      nodes[static_cast<std::size_t>(pos)] = candidates[static_cast<std::size_t>(pos)];
      nodes.erase(nodes.begin() + pos + 1);
      merge_trees(trees, pos);
      out.chosen.push_back(pos + 1);
    }
    out.sentence = nodes[0].h;
    out.tree = trees[0];
    return out;
  }

  // Features [u; v; |u-v|; u*v] through one hidden layer to a label softmax.
  ClassifyResultT<Scalar> classify_pair(Tape& tape, Var premise, Var hypothesis) const {
    Var diff = ad::abs(ad::sub(premise, hypothesis));
    Var prod = ad::cmul(premise, hypothesis);
    Var features = ad::concat_rows<Scalar>({premise, hypothesis, diff, prod});
    Var hidden = ad::tanh(ad::affine(tape.param("tree.cls.w1"), features,
                                     tape.param("tree.cls.b1")));
    Var logits = ad::affine(tape.param("tree.cls.w2"), hidden,
                            tape.param("tree.cls.b2"));
    return {logits, ad::softmax(logits)};
  }

  // Trees for a whole corpus in argmax mode. No gradients are kept.
  std::vector<BinaryTree> parse_corpus(
      const std::vector<std::vector<int>>& ids,
      const std::vector<std::vector<std::string>>& words) {
    if (ids.size() != words.size()) {
      throw DataError("parse_corpus: ids/words corpora differ in length");
    }
    std::vector<BinaryTree> out;
    out.reserve(ids.size());
    EncodeOptionsT<Scalar> opts;
    opts.mode = TreeMode::Argmax;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tape tape(params_);
      out.push_back(encode_sentence(tape, ids[i], words[i], opts).tree);
    }
    return out;
  }

 private:
  // Straight-through update of the node sequence: position j of the new
  // sequence is old_j where the selection lies right of j, the composed pair
  // where it hits j, and old_{j+1} where it lies left. The selection vector
  // is one-hot in the forward pass and relaxed in the backward pass.
  static void mix_nodes(Tape& tape, std::vector<NodeState>& nodes,
                        const std::vector<NodeState>& candidates, Var st,
                        int action) {
    std::size_t m1 = candidates.size();  // M-1 new positions
    ad::Mat<Scalar> upper = ad::Mat<Scalar>::Zero(m1, m1);
    ad::Mat<Scalar> lower = ad::Mat<Scalar>::Zero(m1, m1);
    for (std::size_t r = 0; r < m1; ++r) {
      for (std::size_t c = 0; c < m1; ++c) {
        if (c > r) upper(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1;
        if (c < r) lower(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1;
      }
    }
    Var keep_left = ad::matmul(tape.constant(upper), st);
    Var keep_right = ad::matmul(tape.constant(lower), st);

    std::vector<NodeState> next;
    next.reserve(m1);
    for (std::size_t j = 0; j < m1; ++j) {
      Eigen::Index jj = static_cast<Eigen::Index>(j);
      Var l = ad::pick(keep_left, jj);
      Var s = ad::pick(st, jj);
      Var r = ad::pick(keep_right, jj);
      Var h = ad::add(ad::add(ad::matmul(nodes[j].h, l), ad::matmul(candidates[j].h, s)),
                      ad::matmul(nodes[j + 1].h, r));
      Var c = ad::add(ad::add(ad::matmul(nodes[j].c, l), ad::matmul(candidates[j].c, s)),
                      ad::matmul(nodes[j + 1].c, r));
      next.push_back({h, c});
    }
    (void)action;
    nodes = std::move(next);
  }

  static void merge_trees(std::vector<BinaryTree>& trees, int pos) {
    std::size_t i = static_cast<std::size_t>(pos);
    trees[i] = BinaryTree::node(trees[i], trees[i + 1]);
    trees.erase(trees.begin() + pos + 1);
  }

  TreeLstmConfig cfg_;
  Store params_;
};

}  // namespace uparse
