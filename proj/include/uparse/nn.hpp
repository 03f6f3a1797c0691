#pragma once

// Small graph-building blocks shared by the sequence models.

#include "uparse/autodiff.hpp"

namespace uparse::ad {

template <class Scalar>
struct NodeStateT {
  VarT<Scalar> h;
  VarT<Scalar> c;
};

template <class Scalar>
VarT<Scalar> affine(VarT<Scalar> w, VarT<Scalar> x, VarT<Scalar> b) {
  return add(matmul(w, x), b);
}

// One step of a standard LSTM cell. The 4H preactivation rows are, in order,
// input gate, forget gate, output gate, candidate.
template <class Scalar>
NodeStateT<Scalar> lstm_step(VarT<Scalar> w_ih, VarT<Scalar> w_hh, VarT<Scalar> b,
                             VarT<Scalar> x, NodeStateT<Scalar> prev) {
  Eigen::Index hidden = prev.h.rows();
  VarT<Scalar> pre = add(add(matmul(w_ih, x), matmul(w_hh, prev.h)), b);
  VarT<Scalar> i = sigmoid(slice_rows(pre, 0, hidden));
  VarT<Scalar> f = sigmoid(slice_rows(pre, hidden, hidden));
  VarT<Scalar> o = sigmoid(slice_rows(pre, 2 * hidden, hidden));
  VarT<Scalar> u = tanh(slice_rows(pre, 3 * hidden, hidden));
  VarT<Scalar> c = add(cmul(f, prev.c), cmul(i, u));
  VarT<Scalar> h = cmul(o, tanh(c));
  return {h, c};
}

}  // namespace uparse::ad
