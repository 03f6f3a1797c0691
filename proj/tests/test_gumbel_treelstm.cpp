#include <doctest.h>

#include <cmath>

#include "uparse/gradcheck.hpp"
#include "uparse/gumbel_treelstm.hpp"

using namespace uparse;
using namespace uparse::ad;

namespace {

TreeLstmConfig toy_config() {
  TreeLstmConfig cfg;
  cfg.vocab_size = 10;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 4;
  cfg.classifier_hidden = 6;
  cfg.seed = 5;
  return cfg;
}

std::vector<std::string> words_for(const std::vector<int>& ids) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < ids.size(); ++i) w.push_back("w" + std::to_string(i + 1));
  return w;
}

}  // namespace

TEST_CASE("compose with zero parameters matches hand arithmetic") {
  TreeLstmT<double> model(toy_config());
  for (auto* p : model.params().all()) p->value.setZero();
  TapeT<double> tape(model.params());
  Mat<double> hl = Mat<double>::Zero(4, 1), cl(4, 1), hr = Mat<double>::Zero(4, 1), cr(4, 1);
  cl << 0.4, -0.2, 1.0, 0.0;
  cr << -0.6, 0.8, 0.2, 1.0;
  NodeStateT<double> left{tape.constant(hl), tape.constant(cl)};
  NodeStateT<double> right{tape.constant(hr), tape.constant(cr)};
  NodeStateT<double> out = model.compose(tape, left, right);
  // All gates sit at sigmoid(0) = 0.5 and the candidate at tanh(0) = 0:
  // c = 0.5*(cl + cr), h = 0.5*tanh(c).
  for (int i = 0; i < 4; ++i) {
    double c = 0.5 * (cl(i, 0) + cr(i, 0));
    CHECK(out.c.value()(i, 0) == doctest::Approx(c).epsilon(1e-15));
    CHECK(out.h.value()(i, 0) == doctest::Approx(0.5 * std::tanh(c)).epsilon(1e-15));
  }
  CHECK(out.h.rows() == 4);
  CHECK(out.c.rows() == 4);
}

TEST_CASE("candidate scores") {
  TreeLstmT<double> model(toy_config());
  TapeT<double> tape(model.params());

  SUBCASE("zero query gives the uniform distribution") {
    model.params().at("tree.query").value.setZero();
    TapeT<double> t2(model.params());
    std::vector<NodeStateT<double>> cands;
    for (int i = 0; i < 3; ++i) {
      cands.push_back({t2.input(Mat<double>::Random(4, 1)),
                       t2.input(Mat<double>::Random(4, 1))});
    }
    VarT<double> p = model.score_candidates(t2, cands);
    for (int i = 0; i < 3; ++i) {
      CHECK(p.value()(i, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
  }

  SUBCASE("hand softmax of scores ln2 and 0") {
    // Query picks out the first coordinate; candidates carry ln2 and 0 there.
    model.params().at("tree.query").value.setZero();
    model.params().at("tree.query").value(0, 0) = 1.0;
    TapeT<double> t2(model.params());
    Mat<double> h1 = Mat<double>::Zero(4, 1), h2 = Mat<double>::Zero(4, 1);
    h1(0, 0) = std::log(2.0);
    std::vector<NodeStateT<double>> cands = {{t2.constant(h1), t2.constant(h1)},
                                             {t2.constant(h2), t2.constant(h2)}};
    VarT<double> p = model.score_candidates(t2, cands);
    CHECK(p.value()(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(p.value()(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  SUBCASE("a single candidate scores probability one") {
    std::vector<NodeStateT<double>> cands = {
        {tape.input(Mat<double>::Random(4, 1)), tape.input(Mat<double>::Random(4, 1))}};
    VarT<double> p = model.score_candidates(tape, cands);
    CHECK(p.rows() == 1);
    CHECK(p.value()(0, 0) == 1.0);
  }

  SUBCASE("no candidates is an error") {
    std::vector<NodeStateT<double>> none;
    CHECK_THROWS_AS(model.score_candidates(tape, none), DataError);
  }
}

TEST_CASE("gradient check through one compose") {
  TreeLstmConfig cfg = toy_config();
  TreeLstmT<double> model(cfg);
  TreeLstmT<long double> wide(cfg);
  Mat<double> hl = Mat<double>::Random(4, 1), cl = Mat<double>::Random(4, 1);
  Mat<double> hr = Mat<double>::Random(4, 1), cr = Mat<double>::Random(4, 1);
  auto loss64 = [&](TapeT<double>& tape) {
    NodeStateT<double> l{tape.constant(hl), tape.constant(cl)};
    NodeStateT<double> r{tape.constant(hr), tape.constant(cr)};
    auto out = model.compose(tape, l, r);
    return mean(cmul(out.h, out.h));
  };
  auto loss_wide = [&](TapeT<long double>& tape) {
    NodeStateT<long double> l{tape.constant(hl.cast<long double>()),
                              tape.constant(cl.cast<long double>())};
    NodeStateT<long double> r{tape.constant(hr.cast<long double>()),
                              tape.constant(cr.cast<long double>())};
    auto out = wide.compose(tape, l, r);
    return mean(cmul(out.h, out.h));
  };
  double err = gradient_check_wide(model.params(), loss64, wide.params(),
                                   loss_wide, 1e-5)
                   .max_rel_error;
  CHECK(err <= 1e-4);
}

TEST_CASE("st_gumbel_sample basics") {
  TreeLstmT<double> model(toy_config());

  SUBCASE("degenerate distribution always selects its support") {
    Rng rng(3);
    for (int iter = 0; iter < 200; ++iter) {
      TapeT<double> tape(model.params());
      Mat<double> p(2, 1);
      p << 1.0, 0.0;
      auto res = st_gumbel_sample(tape, tape.constant(p), tape.scalar(1.0), &rng);
      CHECK(res.action == 0);
    }
  }

  SUBCASE("zero injected noise at gamma 1 returns p itself") {
    TapeT<double> tape(model.params());
    Mat<double> p(3, 1);
    p << 0.2, 0.3, 0.5;
    Eigen::VectorXd zero_noise = Eigen::VectorXd::Zero(3);
    auto res = st_gumbel_sample(tape, tape.constant(p), tape.scalar(1.0), nullptr,
                                &zero_noise);
    for (int i = 0; i < 3; ++i) {
      CHECK(res.relaxed.value()(i, 0) == doctest::Approx(p(i, 0)).epsilon(1e-12));
    }
    CHECK(res.action == 2);  // argmax of log p with zero noise
    CHECK(res.straight_through.value()(2, 0) == 1.0);
    CHECK(res.straight_through.value()(0, 0) == 0.0);
  }

  SUBCASE("empirical frequencies match the distribution") {
    Rng rng(99);
    Eigen::VectorXd p(3);
    p << 0.2, 0.3, 0.5;
    int counts[3] = {0, 0, 0};
    const int samples = 100000;
    for (int i = 0; i < samples; ++i) ++counts[gumbel_argmax(p, rng)];
    for (int k = 0; k < 3; ++k) {
      double freq = static_cast<double>(counts[k]) / samples;
      CHECK(std::abs(freq - p[k]) <= 0.01);
    }
  }

  SUBCASE("relaxed distribution collapses onto the action as gamma -> 0") {
    Rng rng(7);
    for (int iter = 0; iter < 50; ++iter) {
      TapeT<double> tape(model.params());
      Mat<double> p(4, 1);
      double total = 0;
      for (int i = 0; i < 4; ++i) total += (p(i, 0) = 0.05 + rng.uniform());
      p /= total;
      auto res = st_gumbel_sample(tape, tape.constant(p), tape.scalar(1e-4), &rng);
      Mat<double> onehot = Mat<double>::Zero(4, 1);
      onehot(res.action, 0) = 1.0;
      CHECK((res.relaxed.value() - onehot).cwiseAbs().maxCoeff() < 1e-3);
    }
  }

  SUBCASE("backward path is independent of the tie-break") {
    // Two identical probabilities and identical noise: force either side of
    // the tie and verify the upstream gradient does not move.
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(2);
    Mat<double> grads[2];
    for (int pick_side = 0; pick_side < 2; ++pick_side) {
      ParamStoreT<double> store(1);
      store.add_value("scores", Mat<double>::Zero(2, 1));
      TapeT<double> tape(store);
      VarT<double> p = softmax(tape.param("scores"));
      auto res = st_gumbel_sample(tape, p, tape.scalar(0.7), nullptr, &noise,
                                  pick_side);
      Mat<double> w(2, 1);
      w << 1.3, -0.4;
      tape.backward(ad::sum(cmul(tape.constant(w), res.straight_through)));
      grads[pick_side] = store.at("scores").grad;
    }
    CHECK(grads[0] == grads[1]);
  }
}

TEST_CASE("encode_sentence modes") {
  TreeLstmT<double> model(toy_config());
  std::vector<int> ids = {2, 3, 4, 5};
  std::vector<std::string> words = words_for(ids);

  SUBCASE("single token returns the leaf state") {
    TapeT<double> tape(model.params());
    EncodeOptionsT<double> opts;
    auto enc = model.encode_sentence(tape, {3}, {"w1"}, opts);
    CHECK(enc.step_probs.empty());
    CHECK(enc.chosen.empty());
    CHECK(enc.tree.is_leaf());
    CHECK(enc.sentence.rows() == 4);
  }

  SUBCASE("forced mode rebuilds the requested tree") {
    TapeT<double> tape(model.params());
    CompositionSequence seq{{2, 2, 1}};
    EncodeOptionsT<double> opts;
    opts.mode = TreeMode::Forced;
    opts.forced = &seq;
    auto enc = model.encode_sentence(tape, ids, words, opts);
    CHECK(enc.tree == order_to_tree(seq, words));
    CHECK(enc.chosen == std::vector<int>{2, 2, 1});
    REQUIRE(enc.step_probs.size() == 3);
    CHECK(enc.step_probs[0].rows() == 3);
    CHECK(enc.step_probs[1].rows() == 2);
    CHECK(enc.step_probs[2].rows() == 1);
    for (auto& p : enc.step_probs) {
      CHECK(p.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
    }

    CompositionSequence bad{{2, 9, 1}};
    EncodeOptionsT<double> bad_opts;
    bad_opts.mode = TreeMode::Forced;
    bad_opts.forced = &bad;
    TapeT<double> tape2(model.params());
    CHECK_THROWS_AS(model.encode_sentence(tape2, ids, words, bad_opts), DataError);
  }

  SUBCASE("argmax mode is deterministic and matches forcing its own choices") {
    TapeT<double> t1(model.params());
    TapeT<double> t2(model.params());
    EncodeOptionsT<double> opts;
    auto a = model.encode_sentence(t1, ids, words, opts);
    auto b = model.encode_sentence(t2, ids, words, opts);
    CHECK(a.tree == b.tree);
    CHECK(a.sentence.value() == b.sentence.value());

    CompositionSequence seq{a.chosen};
    EncodeOptionsT<double> forced;
    forced.mode = TreeMode::Forced;
    forced.forced = &seq;
    TapeT<double> t3(model.params());
    auto c = model.encode_sentence(t3, ids, words, forced);
    CHECK(c.tree == a.tree);
    CHECK(c.sentence.value() == a.sentence.value());
  }

  SUBCASE("sample mode builds a valid tree over the tokens") {
    Rng rng(21);
    for (int iter = 0; iter < 30; ++iter) {
      TapeT<double> tape(model.params());
      EncodeOptionsT<double> opts;
      opts.mode = TreeMode::Sample;
      opts.rng = &rng;
      auto enc = model.encode_sentence(tape, ids, words, opts);
      CHECK(enc.tree.leaf_count() == 4);
      auto fringe = enc.tree.fringe();
      for (int i = 0; i < 4; ++i) {
        CHECK(fringe[static_cast<std::size_t>(i)].surface == words[static_cast<std::size_t>(i)]);
        CHECK(fringe[static_cast<std::size_t>(i)].index == i + 1);
      }
      // Forward values of the straight-through mix equal the hard rebuild.
      CompositionSequence seq{enc.chosen};
      EncodeOptionsT<double> forced;
      forced.mode = TreeMode::Forced;
      forced.forced = &seq;
      TapeT<double> tape2(model.params());
      auto hard = model.encode_sentence(tape2, ids, words, forced);
      CHECK(hard.tree == enc.tree);
      CHECK((hard.sentence.value() - enc.sentence.value()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("sample mode trains the scorer through the straight-through path") {
  TreeLstmT<double> model(toy_config());
  std::vector<int> ids = {2, 3, 4};
  std::vector<std::string> words = words_for(ids);
  Rng rng(11);
  TapeT<double> tape(model.params());
  EncodeOptionsT<double> opts;
  opts.mode = TreeMode::Sample;
  opts.rng = &rng;
  auto enc = model.encode_sentence(tape, ids, words, opts);
  model.params().zero_grads();
  tape.backward(mean(cmul(enc.sentence, enc.sentence)));
  CHECK(model.params().at("tree.query").grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(model.params().at("tree.gamma").grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("classify_pair") {
  TreeLstmT<double> model(toy_config());
  TapeT<double> tape(model.params());
  Mat<double> u = Mat<double>::Random(4, 1);
  auto res = model.classify_pair(tape, tape.constant(u), tape.constant(u));
  CHECK(res.probs.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.probs.rows() == 3);

  // Identical vectors zero out the |u-v| feature block; verify by checking
  // the classifier is insensitive to flipping both inputs' roles.
  auto swapped = model.classify_pair(tape, tape.constant(u), tape.constant(u));
  CHECK(res.logits.value() == swapped.logits.value());
}

TEST_CASE("gradient check through classifier and both encoders") {
  TreeLstmConfig cfg = toy_config();
  TreeLstmT<double> model(cfg);
  TreeLstmT<long double> wide(cfg);
  std::vector<int> prem = {2, 3, 4, 5};
  std::vector<int> hyp = {6, 7, 8};
  CompositionSequence seq_p{{2, 1, 1}};
  CompositionSequence seq_h{{1, 1}};
  auto build = [&](auto& m, auto& tape) {
    EncodeOptionsT<typename std::decay_t<decltype(m)>::ScalarType> opts;
    opts.mode = TreeMode::Forced;
    opts.forced = &seq_p;
    auto ep = m.encode_sentence(tape, prem, words_for(prem), opts);
    opts.forced = &seq_h;
    auto eh = m.encode_sentence(tape, hyp, words_for(hyp), opts);
    auto cls = m.classify_pair(tape, ep.sentence, eh.sentence);
    return ad::cross_entropy(cls.logits, 1);
  };
  auto loss64 = [&](TapeT<double>& tape) { return build(model, tape); };
  auto loss_wide = [&](TapeT<long double>& tape) { return build(wide, tape); };
  double err = gradient_check_wide(model.params(), loss64, wide.params(),
                                   loss_wide, 1e-5)
                   .max_rel_error;
  CHECK(err <= 1e-4);
}

TEST_CASE("float32 tree-lstm instantiation") {
  TreeLstmConfig cfg = toy_config();
  TreeLstmT<float> model(cfg);
  TapeT<float> tape(model.params());
  EncodeOptionsT<float> opts;
  auto enc = model.encode_sentence(tape, {2, 3, 4}, words_for({2, 3, 4}), opts);
  CHECK(enc.tree.leaf_count() == 3);
}
