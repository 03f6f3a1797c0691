#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "uparse/autodiff.hpp"
#include "uparse/checkpoint.hpp"
#include "uparse/errors.hpp"
#include "uparse/gradcheck.hpp"
#include "uparse/nn.hpp"

using namespace uparse;
using namespace uparse::ad;

namespace {

Mat<double> colvec(std::initializer_list<double> xs) {
  Mat<double> m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("softmax values") {
  TapeT<double> tape;
  VarT<double> s = softmax(tape.constant(colvec({0, 0, 0})));
  CHECK(s.value()(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(s.value()(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(s.value()(2, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  VarT<double> t = softmax(tape.constant(colvec({std::log(2.0), 0.0})));
  CHECK(t.value()(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(t.value()(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax outputs are positive and normalized") {
  Rng rng(5);
  TapeT<double> tape;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(8));
    Mat<double> x(n, 3);
    for (Eigen::Index c = 0; c < 3; ++c)
      for (Eigen::Index r = 0; r < n; ++r) x(r, c) = rng.uniform(-30.0, 30.0);
    VarT<double> s = softmax(tape.constant(x), 0);
    for (Eigen::Index c = 0; c < 3; ++c) {
      CHECK(s.value().col(c).minCoeff() > 0.0);
      CHECK(std::abs(s.value().col(c).sum() - 1.0) <= 1e-12);
    }
    VarT<double> srow = softmax(tape.constant(x.transpose().eval()), 1);
    for (Eigen::Index r = 0; r < 3; ++r) {
      CHECK(std::abs(srow.value().row(r).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("hardtanh values and subgradient") {
  TapeT<double> tape;
  VarT<double> x = tape.input(colvec({2.5, -2.5, 0.2, 1.0}));
  VarT<double> y = hardtanh(x);
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(1, 0) == -1.0);
  CHECK(y.value()(2, 0) == doctest::Approx(0.2).epsilon(1e-15));
  tape.backward(sum(y));
  CHECK(x.grad()(0, 0) == 0.0);
  CHECK(x.grad()(1, 0) == 0.0);
  CHECK(x.grad()(2, 0) == 1.0);
  // |x| == 1 sits in the saturated region by convention.
  CHECK(x.grad()(3, 0) == 0.0);
  CHECK(tape.min_hardtanh_margin() == doctest::Approx(0.0));
}

TEST_CASE("simple derivatives") {
  TapeT<double> tape;
  VarT<double> x = tape.input(colvec({3.0}));
  VarT<double> y = cmul(x, x);
  tape.backward(sum(y));
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("softmax sum has zero gradient") {
  TapeT<double> tape;
  VarT<double> x = tape.input(colvec({0.3, -1.2, 2.0}));
  tape.backward(sum(softmax(x)));
  CHECK(x.grad().cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("fan-out accumulates both paths") {
  // f(x, y) = x*y + x  =>  df/dx = y + 1, df/dy = x.
  TapeT<double> tape;
  VarT<double> x = tape.input(colvec({2.0}));
  VarT<double> y = tape.input(colvec({5.0}));
  tape.backward(add(cmul(x, y), x));
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));
  CHECK(y.grad()(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("shape mismatch errors name the op and shapes") {
  TapeT<double> tape;
  VarT<double> a = tape.constant(Mat<double>::Zero(2, 3));
  VarT<double> b = tape.constant(Mat<double>::Zero(4, 1));
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: incompatible shapes 2x3 * 4x1",
                       ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(cmul(a, b), ShapeError);
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
}

TEST_CASE("parameter gradients accumulate until zeroed") {
  ParamStoreT<double> store(1);
  store.add_value("x", colvec({4.0}));
  auto run = [&] {
    TapeT<double> tape(store);
    VarT<double> x = tape.param("x");
    tape.backward(cmul(x, x));
  };
  run();
  CHECK(store.at("x").grad(0, 0) == doctest::Approx(8.0));
  run();
  CHECK(store.at("x").grad(0, 0) == doctest::Approx(16.0));
  store.zero_grads();
  CHECK(store.at("x").grad(0, 0) == 0.0);
}

TEST_CASE("gradient_check on closed forms") {
  ParamStoreT<double> store(3);
  store.add_matrix("w", 3, 3);
  store.add_bias("b", 3);

  // Quadratic in the parameters.
  auto quadratic = [](TapeT<double>& tape) {
    VarT<double> w = tape.param("w");
    VarT<double> b = tape.param("b");
    VarT<double> x = tape.constant(colvec({0.5, -1.0, 2.0}));
    VarT<double> y = add(matmul(w, x), b);
    return sum(cmul(y, y));
  };
  CHECK(gradient_check<double>(store, quadratic, 1e-5) <= 1e-9);

  auto constant = [](TapeT<double>& tape) { return tape.scalar(3.5); };
  CHECK(gradient_check<double>(store, constant, 1e-5) == 0.0);

  CHECK_THROWS_AS(gradient_check<double>(store, quadratic, 0.0), DataError);
}

TEST_CASE("gradient_check on an assortment of ops") {
  ParamStoreT<double> store(9);
  store.add_matrix("w", 4, 6);
  store.add_embedding("e", 5, 3);
  store.add_bias("b", 4);
  auto loss = [](TapeT<double>& tape) {
    VarT<double> w = tape.param("w");
    VarT<double> e = tape.param("e");
    VarT<double> b = tape.param("b");
    VarT<double> x = concat_rows<double>({lookup(e, 1), lookup(e, 4)});
    VarT<double> y = tanh(add(matmul(w, x), b));
    VarT<double> z = concat_rows<double>(
        {sigmoid(slice_rows(y, 0, 2)), ad::exp(scale(slice_rows(y, 2, 2), 0.3))});
    VarT<double> s = softmax(z);
    VarT<double> picked = ad::log(clamp_min(pick(s, 1), 1e-20));
    VarT<double> ce = cross_entropy(z, 3);
    VarT<double> d = dot(z, z);
    VarT<double> ab = sum(ad::abs(transpose(y)));
    VarT<double> r = sum(reciprocal(add(tape.scalar(3.0), mean(cmul(z, z)))));
    return add(add(sub(ce, picked), add(d, ab)), r);
  };
  CHECK(gradient_check<double>(store, loss, 1e-5) <= 1e-8);
}

TEST_CASE("gradient_check through an LSTM-style cell") {
  ParamStoreT<double> store(17);
  Eigen::Index hidden = 5, input = 3;
  store.add_matrix("w_ih", 4 * hidden, input);
  store.add_matrix("w_hh", 4 * hidden, hidden);
  store.add_bias("b", 4 * hidden);
  Rng rng(11);
  Mat<double> x(input, 1), h0(hidden, 1), c0(hidden, 1);
  for (Eigen::Index i = 0; i < input; ++i) x(i, 0) = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < hidden; ++i) {
    h0(i, 0) = rng.uniform(-1, 1);
    c0(i, 0) = rng.uniform(-1, 1);
  }
  auto loss = [&](TapeT<double>& tape) {
    NodeStateT<double> prev{tape.constant(h0), tape.constant(c0)};
    NodeStateT<double> s1 = lstm_step(tape.param("w_ih"), tape.param("w_hh"),
                                      tape.param("b"), tape.constant(x), prev);
    NodeStateT<double> s2 = lstm_step(tape.param("w_ih"), tape.param("w_hh"),
                                      tape.param("b"), tape.constant(x), s1);
    return mean(cmul(s2.h, s2.h));
  };
  CHECK(gradient_check<double>(store, loss, 1e-5) <= 1e-4);
}

TEST_CASE("float32 mode works end to end") {
  ParamStoreT<float> store(7);
  store.add_matrix("w", 3, 2);
  TapeT<float> tape(store);
  VarT<float> w = tape.param("w");
  VarT<float> x = tape.constant(Mat<float>::Ones(2, 1));
  VarT<float> loss = sum(cmul(matmul(w, x), matmul(w, x)));
  tape.backward(loss);
  CHECK(store.at("w").grad.cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("init distributions are deterministic per seed") {
  ParamStoreT<double> a(42), b(42), c(43);
  a.add_matrix("w", 4, 4);
  b.add_matrix("w", 4, 4);
  c.add_matrix("w", 4, 4);
  CHECK(a.at("w").value == b.at("w").value);
  CHECK(a.at("w").value != c.at("w").value);
  // Scaled-uniform bound.
  CHECK(a.at("w").value.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 8.0));
  a.add_embedding("e", 10, 4);
  CHECK(a.at("e").value.cwiseAbs().maxCoeff() <= 0.1);
  a.add_bias("bias", 3);
  CHECK(a.at("bias").value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient clipping at global norm") {
  ParamStoreT<double> store(1);
  store.add_value("x", colvec({30.0}));
  TapeT<double> tape(store);
  VarT<double> x = tape.param("x");
  tape.backward(cmul(x, x));  // grad 60
  CHECK(store.grad_norm() == doctest::Approx(60.0));
  store.clip_grads(5.0);
  CHECK(store.grad_norm() == doctest::Approx(5.0));
  store.sgd_step(1.0);
  CHECK(store.at("x").value(0, 0) == doctest::Approx(25.0));
}

TEST_CASE("checkpoint round-trip") {
  namespace fs = std::filesystem;
  ParamStoreT<double> store(9);
  store.add_matrix("layer.w", 4, 3);
  store.add_bias("layer.b", 4);
  store.add_embedding("embed", 6, 2);

  fs::path path = fs::temp_directory_path() / "uparse_ckpt_test.bin";
  save_checkpoint(store, path.string());
  ParamStoreT<double> loaded = load_checkpoint<double>(path.string());
  REQUIRE(loaded.size() == store.size());
  CHECK(loaded.at("layer.w").value == store.at("layer.w").value);
  CHECK(loaded.at("layer.b").value == store.at("layer.b").value);
  CHECK(loaded.at("embed").value == store.at("embed").value);

  // Order of parameters is preserved.
  CHECK(loaded.all()[0]->name == "layer.w");
  CHECK(loaded.all()[2]->name == "embed");

  ParamStoreT<float> as_float = load_checkpoint<float>(path.string());
  CHECK(as_float.at("embed").value.rows() == 6);

  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint<double>(path.string()), DataError);
}
