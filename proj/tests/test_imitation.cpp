#include <doctest.h>

#include <cmath>

#include "uparse/eval.hpp"
#include "uparse/gradcheck.hpp"
#include "uparse/imitation.hpp"

using namespace uparse;
using namespace uparse::ad;

namespace {

TreeLstmConfig toy_config() {
  TreeLstmConfig cfg;
  cfg.vocab_size = 12;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 6;
  cfg.classifier_hidden = 6;
  cfg.seed = 3;
  return cfg;
}

BinaryTree w(int i) { return BinaryTree::leaf(Token{"w" + std::to_string(i), i}); }

std::vector<std::string> words_for(const std::vector<int>& ids) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back("w" + std::to_string(i + 1));
  return out;
}

DistanceVector dv(std::initializer_list<double> values) {
  DistanceVector d(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) d[i++] = v;
  return d;
}

}  // namespace

TEST_CASE("make_sbs_targets delegates to the composition order") {
  BinaryTree nested = BinaryTree::node(
      w(1), BinaryTree::node(BinaryTree::node(w(2), w(3)), w(4)));
  CHECK(make_sbs_targets(nested, dv({3, 1, 2})).steps == std::vector<int>{2, 2, 1});
  CHECK(make_sbs_targets(BinaryTree::node(w(1), w(2)), dv({1})).steps ==
        std::vector<int>{1});
  BinaryTree balanced = BinaryTree::node(BinaryTree::node(w(1), w(2)),
                                         BinaryTree::node(w(3), w(4)));
  CHECK(make_sbs_targets(balanced, dv({1, 2, 1})).steps == std::vector<int>{1, 2, 1});
  CHECK_THROWS_AS(make_sbs_targets(balanced, dv({1, 2})), DataError);
}

TEST_CASE("parse_loss values") {
  TapeT<double> tape;
  auto colvec = [&](std::initializer_list<double> xs) {
    Mat<double> m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return tape.constant(m);
  };

  SUBCASE("perfect predictions cost zero") {
    std::vector<VarT<double>> probs = {colvec({0.0, 1.0, 0.0}), colvec({1.0, 0.0}),
                                       colvec({1.0})};
    VarT<double> loss = parse_loss(tape, probs, CompositionSequence{{2, 1, 1}});
    CHECK(loss.scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("uniform predictions cost the log candidate counts") {
    std::vector<VarT<double>> probs = {colvec({1.0 / 3, 1.0 / 3, 1.0 / 3}),
                                       colvec({0.5, 0.5})};
    VarT<double> loss = parse_loss(tape, probs, CompositionSequence{{1, 2}});
    CHECK(loss.scalar_value() ==
          doctest::Approx(std::log(3.0) + std::log(2.0)).epsilon(1e-12));
    CHECK(loss.scalar_value() == doctest::Approx(1.7918).epsilon(1e-4));
  }

  SUBCASE("loss is nonnegative") {
    Rng rng(9);
    for (int iter = 0; iter < 50; ++iter) {
      int steps = 1 + static_cast<int>(rng.below(4));
      std::vector<VarT<double>> probs;
      CompositionSequence seq;
      for (int j = 0; j < steps; ++j) {
        int m = steps - j + 1;
        Mat<double> p(m, 1);
        double total = 0;
        for (int i = 0; i < m; ++i) total += (p(i, 0) = 0.01 + rng.uniform());
        p /= total;
        probs.push_back(tape.constant(p));
        seq.steps.push_back(1 + static_cast<int>(rng.below(static_cast<std::size_t>(m))));
      }
      CHECK(parse_loss(tape, probs, seq).scalar_value() >= 0.0);
    }
  }

  SUBCASE("target out of range") {
    std::vector<VarT<double>> probs = {colvec({0.5, 0.5})};
    CHECK_THROWS_AS(parse_loss(tape, probs, CompositionSequence{{3}}), DataError);
    CHECK_THROWS_AS(parse_loss(tape, probs, CompositionSequence{{1, 1}}), DataError);
  }
}

TEST_CASE("joint_loss arithmetic") {
  TapeT<double> tape;
  VarT<double> task = tape.scalar(1.0);
  VarT<double> parse = tape.scalar(2.0);
  CHECK(joint_loss(task, parse, 0.03).scalar_value() ==
        doctest::Approx(1.06).epsilon(1e-12));
  CHECK(joint_loss(task, parse, 0.0).scalar_value() == 1.0);
  ImitationConfig cfg;
  CHECK(cfg.lambda == 0.03);  // paper's setting is the default
}

TEST_CASE("parse loss gradient through forced encoding matches FD") {
  TreeLstmConfig cfg = toy_config();
  TreeLstmT<double> model(cfg);
  TreeLstmT<long double> wide(cfg);
  std::vector<int> ids = {2, 7, 4, 9, 5};
  CompositionSequence target{{2, 3, 1, 1}};
  auto build = [&](auto& m, auto& tape) {
    EncodeOptionsT<typename std::decay_t<decltype(m)>::ScalarType> opts;
    opts.mode = TreeMode::Forced;
    opts.forced = &target;
    auto enc = m.encode_sentence(tape, ids, words_for(ids), opts);
    return parse_loss(tape, enc.step_probs, target);
  };
  auto loss64 = [&](TapeT<double>& tape) { return build(model, tape); };
  auto loss_wide = [&](TapeT<long double>& tape) { return build(wide, tape); };
  double err = gradient_check_wide(model.params(), loss64, wide.params(),
                                   loss_wide, 1e-5)
                   .max_rel_error;
  CHECK(err <= 1e-4);
}

namespace {

// Sentences whose teacher trees follow a word-saliency rule the scorer can
// learn from content alone: each vocabulary word carries a fixed distance
// value, teacher trees are the scheme-A parses of those distances.
SbsCorpus make_clone_corpus(Rng& rng, int sentences, int vocab, int max_len) {
  std::vector<double> saliency(static_cast<std::size_t>(vocab));
  for (int v = 0; v < vocab; ++v) {
    saliency[static_cast<std::size_t>(v)] =
        static_cast<double>(v * 7919 % vocab) / vocab;
  }
  SbsCorpus corpus;
  for (int s = 0; s < sentences; ++s) {
    SbsExample ex;
    int n = 3 + static_cast<int>(rng.below(static_cast<std::size_t>(max_len - 2)));
    for (int i = 0; i < n; ++i) {
      ex.ids.push_back(2 + static_cast<int>(rng.below(static_cast<std::size_t>(vocab - 2))));
    }
    ex.words = words_for(ex.ids);
    DistanceVector d(n - 1);
    for (int j = 0; j + 1 < n; ++j) d[j] = saliency[static_cast<std::size_t>(ex.ids[static_cast<std::size_t>(j + 1)])];
    BinaryTree teacher = infer_tree_scheme_a(d, ex.words);
    ex.target = make_sbs_targets(teacher, tree_to_distances(teacher));
    corpus.sentences.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace

TEST_CASE("train_sbs clones the teacher and is deterministic") {
  Rng rng(41);
  SbsCorpus corpus = make_clone_corpus(rng, 30, 12, 7);

  TreeLstmConfig mcfg = toy_config();
  mcfg.embed_dim = 6;
  mcfg.hidden_dim = 12;
  ImitationConfig icfg;
  icfg.lambda = 1.0;
  icfg.learning_rate = 0.2;
  icfg.epochs = 160;
  icfg.batch_size = 1;
  icfg.seed = 7;

  TreeLstmT<double> model(mcfg);
  double before = eval_parse_loss(model, corpus);
  TrainLog log = train_sbs(model, corpus, icfg);
  double after = eval_parse_loss(model, corpus);
  CHECK(after < 0.05 * before);  // near-perfect imitation on a toy corpus

  // Argmax decoding reproduces the teacher trees.
  int exact = 0;
  double mean_f = 0.0;
  for (const SbsExample& ex : corpus.sentences) {
    TapeT<double> tape(model.params());
    EncodeOptionsT<double> opts;
    auto enc = model.encode_sentence(tape, ex.ids, ex.words, opts);
    if (CompositionSequence{enc.chosen} == ex.target) ++exact;
    mean_f += unlabeled_f(enc.tree, order_to_tree(ex.target, ex.words), true).f;
  }
  mean_f /= static_cast<double>(corpus.sentences.size());
  CHECK(exact >= 27);
  CHECK(mean_f >= 0.95);

  TreeLstmT<double> twin(mcfg);
  TrainLog log2 = train_sbs(twin, corpus, icfg);
  CHECK(log.epoch_loss == log2.epoch_loss);

  SUBCASE("lambda 0 with no task labels leaves parameters unchanged") {
    ImitationConfig zero = icfg;
    zero.lambda = 0.0;
    zero.epochs = 2;
    TreeLstmT<double> still(mcfg);
    Mat<double> before_w = still.params().at("tree.comp.w").value;
    train_sbs(still, corpus, zero);
    CHECK(still.params().at("tree.comp.w").value == before_w);
  }

  SUBCASE("empty corpus is an error") {
    SbsCorpus empty;
    TreeLstmT<double> m(mcfg);
    CHECK_THROWS_AS(train_sbs(m, empty, icfg), DataError);
  }
}

TEST_CASE("train_sbs with pairs optimizes the joint objective") {
  Rng rng(43);
  SbsCorpus corpus = make_clone_corpus(rng, 12, 12, 6);
  for (int i = 0; i + 1 < 12; i += 2) {
    corpus.pairs.push_back({static_cast<int>(rng.below(3)), i, i + 1});
  }
  ImitationConfig icfg;
  icfg.lambda = 0.5;
  icfg.learning_rate = 0.3;
  icfg.epochs = 8;
  icfg.batch_size = 2;
  TreeLstmT<double> model(toy_config());
  TrainLog log = train_sbs(model, corpus, icfg);
  REQUIRE(log.epoch_loss.size() == 8);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());

  SbsCorpus bad = corpus;
  bad.pairs.push_back({0, 0, 99});
  TreeLstmT<double> m2(toy_config());
  CHECK_THROWS_AS(train_sbs(m2, bad, icfg), DataError);
}

TEST_CASE("refine trains the task loss with sampled trees") {
  Rng rng(47);
  SbsCorpus corpus = make_clone_corpus(rng, 10, 12, 6);
  // Labels correlated with premise/hypothesis identity so the task is
  // learnable.
  for (int i = 0; i < 10; ++i) {
    corpus.pairs.push_back({i % 3, i, (i + 1) % 10});
  }
  ImitationConfig icfg;
  icfg.learning_rate = 0.1;
  icfg.epochs = 20;
  icfg.batch_size = 2;
  icfg.seed = 13;
  TreeLstmT<double> model(toy_config());
  CHECK(model.gamma() == 0.5);  // refinement starts at the paper's temperature
  TrainLog log = refine(model, corpus, icfg);
  REQUIRE(log.epoch_loss.size() == 20);
  REQUIRE(log.epoch_metric.size() == 20);
  for (double acc : log.epoch_metric) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  // Doubly stochastic training is noisy; compare first and last thirds.
  double early = (log.epoch_loss[0] + log.epoch_loss[1] + log.epoch_loss[2]) / 3;
  double late = (log.epoch_loss[17] + log.epoch_loss[18] + log.epoch_loss[19]) / 3;
  CHECK(late < early);

  TreeLstmT<double> twin(toy_config());
  TrainLog log2 = refine(twin, corpus, icfg);
  CHECK(log.epoch_loss == log2.epoch_loss);

  SbsCorpus no_pairs = corpus;
  no_pairs.pairs.clear();
  TreeLstmT<double> m3(toy_config());
  CHECK_THROWS_AS(refine(m3, no_pairs, icfg), DataError);
}
