#pragma once

// Reverse-mode automatic differentiation over dense Eigen matrices, sized
// for desk-scale sequence models. A TapeT records one forward pass; backward
// walks the tape in reverse and accumulates gradients into the bound
// ParamStoreT. Tapes are single-writer; distinct tapes over distinct stores
// may run concurrently.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "uparse/errors.hpp"
#include "uparse/rng.hpp"

namespace uparse::ad {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Named trainable parameters plus their accumulated gradients. Creation
// order is stable, so serialization and SGD sweeps are deterministic.
template <class Scalar>
class ParamStoreT {
 public:
  struct Parameter {
    std::string name;
    Mat<Scalar> value;
    Mat<Scalar> grad;
    bool trainable = true;
  };

  explicit ParamStoreT(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  // Uniform(-0.1, 0.1); used for embedding tables.
  Parameter& add_embedding(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols) {
    return add_uniform(name, rows, cols, Scalar(0.1));
  }

  // Scaled-uniform +-sqrt(6 / (fan_in + fan_out)); used for weight matrices.
  Parameter& add_matrix(const std::string& name, Eigen::Index rows,
                        Eigen::Index cols) {
    Scalar limit = std::sqrt(Scalar(6) / static_cast<Scalar>(rows + cols));
    return add_uniform(name, rows, cols, limit);
  }

  Parameter& add_bias(const std::string& name, Eigen::Index rows) {
    return insert(name, Mat<Scalar>::Zero(rows, 1));
  }

  Parameter& add_value(const std::string& name, Mat<Scalar> value) {
    return insert(name, std::move(value));
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return *params_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return *params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  std::size_t coefficient_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  Scalar grad_norm() const {
    Scalar sq = 0;
    for (const auto& p : params_) sq += p->grad.squaredNorm();
    return std::sqrt(sq);
  }

  // Rescales all gradients so their global norm does not exceed max_norm.
  void clip_grads(Scalar max_norm) {
    Scalar norm = grad_norm();
    if (norm > max_norm && norm > Scalar(0)) {
      Scalar s = max_norm / norm;
      for (auto& p : params_) p->grad *= s;
    }
  }

  void sgd_step(Scalar lr) {
    for (auto& p : params_) {
      if (p->trainable) p->value -= lr * p->grad;
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  Parameter& add_uniform(const std::string& name, Eigen::Index rows,
                         Eigen::Index cols, Scalar limit) {
    Mat<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = static_cast<Scalar>(
            rng_.uniform(-static_cast<double>(limit), static_cast<double>(limit)));
      }
    }
    return insert(name, std::move(m));
  }

  Parameter& insert(const std::string& name, Mat<Scalar> value) {
    if (index_.count(name)) throw DataError("duplicate parameter: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->grad = Mat<Scalar>::Zero(value.rows(), value.cols());
    p->value = std::move(value);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  std::uint64_t seed_;
  Rng rng_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

template <class Scalar>
class TapeT;

// Handle to a value recorded on a tape.
template <class Scalar>
class VarT {
 public:
  VarT() = default;
  VarT(TapeT<Scalar>* tape, int index) : tape_(tape), index_(index) {}

  const Mat<Scalar>& value() const;
  Scalar scalar_value() const;
  const Mat<Scalar>& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  TapeT<Scalar>* tape() const { return tape_; }
  int index() const { return index_; }

 private:
  TapeT<Scalar>* tape_ = nullptr;
  int index_ = -1;
};

template <class Scalar>
class TapeT {
 public:
  using Var = VarT<Scalar>;
  using Param = typename ParamStoreT<Scalar>::Parameter;

  TapeT() = default;
  explicit TapeT(ParamStoreT<Scalar>& store) : store_(&store) {}

  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  // Leaf bound to a named store parameter; backward accumulates into the
  // parameter's gradient.
  Var param(const std::string& name) {
    if (!store_) throw DataError("tape has no parameter store");
    Param& p = store_->at(name);
    int idx = push(p.value, p.trainable);
    node(idx).bound = &p;
    node(idx).back = [idx](TapeT& t) {
      t.node(idx).bound->grad += t.node(idx).grad;
    };
    return Var(this, idx);
  }

  Var constant(Mat<Scalar> value) {
    return Var(this, push(std::move(value), false));
  }

  Var scalar(Scalar v) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  // Differentiable input leaf not tied to the store (used in tests).
  Var input(Mat<Scalar> value) { return Var(this, push(std::move(value), true)); }

  // Runs reverse accumulation from a scalar loss. Parameter gradients
  // accumulate across calls until the store is zeroed.
  void backward(Var loss) {
    if (loss.tape() != this) throw DataError("backward: loss from another tape");
    NodeRec& last = node(loss.index());
    if (last.tensor.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(last.tensor.value.rows(), last.tensor.value.cols()));
    }
    accumulate(loss.index(), Mat<Scalar>::Ones(1, 1));
    for (int i = loss.index(); i >= 0; --i) {
      NodeRec& n = node(i);
      if (n.grad.size() != 0 && n.back) n.back(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Smallest | |x| - 1 | over all hardtanh inputs recorded so far; infinity
  // if hardtanh was never used. Lets callers reject parameter points that
  // sit on the kink before running finite differences.
  Scalar min_hardtanh_margin() const { return hardtanh_margin_; }
  void note_hardtanh_input(Scalar x) {
    Scalar m = std::abs(std::abs(x) - Scalar(1));
    if (m < hardtanh_margin_) hardtanh_margin_ = m;
  }

  // --- interior API used by the op free functions ---

  struct NodeRec {
    struct Tensor {
      Mat<Scalar> value;
      bool requires_grad = false;
    } tensor;
    Mat<Scalar> grad;  // empty until touched by backward
    std::function<void(TapeT&)> back;
    Param* bound = nullptr;
  };

  int push(Mat<Scalar> value, bool requires_grad) {
    NodeRec n;
    n.tensor.value = std::move(value);
    n.tensor.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  NodeRec& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const NodeRec& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  const Mat<Scalar>& value(int i) const { return node(i).tensor.value; }

  // Adds g into node i's gradient if that node participates in
  // differentiation.
  template <class Expr>
  void accumulate(int i, const Expr& g) {
    NodeRec& n = node(i);
    if (!n.tensor.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  bool requires_grad(int i) const { return node(i).tensor.requires_grad; }

 private:
  ParamStoreT<Scalar>* store_ = nullptr;
  std::vector<NodeRec> nodes_;
  Scalar hardtanh_margin_ = std::numeric_limits<Scalar>::infinity();
};

template <class Scalar>
const Mat<Scalar>& VarT<Scalar>::value() const {
  return tape_->value(index_);
}

template <class Scalar>
Scalar VarT<Scalar>::scalar_value() const {
  const Mat<Scalar>& v = value();
  if (v.size() != 1) {
    throw ShapeError("scalar_value: tensor is " + shape_str(v.rows(), v.cols()));
  }
  return v(0, 0);
}

template <class Scalar>
const Mat<Scalar>& VarT<Scalar>::grad() const {
  return tape_->node(index_).grad;
}

// ---------------------------------------------------------------------------
// Ops. Each records its result and a reverse closure on the tape.

namespace detail {

template <class Scalar>
void check_same_shape(const char* op, const Mat<Scalar>& a, const Mat<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": mismatched shapes " +
                     shape_str(a.rows(), a.cols()) + " and " +
                     shape_str(b.rows(), b.cols()));
  }
}

template <class Scalar>
void check_same_tape(const char* op, const VarT<Scalar>& a, const VarT<Scalar>& b) {
  if (a.tape() != b.tape()) {
    throw DataError(std::string(op) + ": operands from different tapes");
  }
}

// Elementwise op with value map f and derivative-from-(x,y) map df.
template <class Scalar, class F, class DF>
VarT<Scalar> unary_cwise(const char* /*op*/, VarT<Scalar> a, F f, DF df) {
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value().unaryExpr(f), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out, df](TapeT<Scalar>& tt) {
    const auto& x = tt.value(ai);
    const auto& y = tt.value(out);
    tt.accumulate(ai, tt.node(out).grad.cwiseProduct(
                          x.binaryExpr(y, df)));
  };
  return VarT<Scalar>(&t, out);
}

}  // namespace detail

template <class Scalar>
VarT<Scalar> matmul(VarT<Scalar> a, VarT<Scalar> b) {
  detail::check_same_tape("matmul", a, b);
  TapeT<Scalar>& t = *a.tape();
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " +
                     shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  }
  int out = t.push(a.value() * b.value(),
                   t.requires_grad(a.index()) || t.requires_grad(b.index()));
  int ai = a.index(), bi = b.index();
  t.node(out).back = [ai, bi, out](TapeT<Scalar>& tt) {
    const Mat<Scalar>& g = tt.node(out).grad;
    tt.accumulate(ai, g * tt.value(bi).transpose());
    tt.accumulate(bi, tt.value(ai).transpose() * g);
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> transpose(VarT<Scalar> a) {
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value().transpose(), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out](TapeT<Scalar>& tt) {
    tt.accumulate(ai, tt.node(out).grad.transpose());
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> add(VarT<Scalar> a, VarT<Scalar> b) {
  detail::check_same_tape("add", a, b);
  detail::check_same_shape("add", a.value(), b.value());
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value() + b.value(),
                   t.requires_grad(a.index()) || t.requires_grad(b.index()));
  int ai = a.index(), bi = b.index();
  t.node(out).back = [ai, bi, out](TapeT<Scalar>& tt) {
    tt.accumulate(ai, tt.node(out).grad);
    tt.accumulate(bi, tt.node(out).grad);
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> sub(VarT<Scalar> a, VarT<Scalar> b) {
  detail::check_same_tape("sub", a, b);
  detail::check_same_shape("sub", a.value(), b.value());
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value() - b.value(),
                   t.requires_grad(a.index()) || t.requires_grad(b.index()));
  int ai = a.index(), bi = b.index();
  t.node(out).back = [ai, bi, out](TapeT<Scalar>& tt) {
    tt.accumulate(ai, tt.node(out).grad);
    tt.accumulate(bi, -tt.node(out).grad);
  };
  return VarT<Scalar>(&t, out);
}

// Elementwise product.
template <class Scalar>
VarT<Scalar> cmul(VarT<Scalar> a, VarT<Scalar> b) {
  detail::check_same_tape("cmul", a, b);
  detail::check_same_shape("cmul", a.value(), b.value());
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value().cwiseProduct(b.value()),
                   t.requires_grad(a.index()) || t.requires_grad(b.index()));
  int ai = a.index(), bi = b.index();
  t.node(out).back = [ai, bi, out](TapeT<Scalar>& tt) {
    const Mat<Scalar>& g = tt.node(out).grad;
    tt.accumulate(ai, g.cwiseProduct(tt.value(bi)));
    tt.accumulate(bi, g.cwiseProduct(tt.value(ai)));
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> scale(VarT<Scalar> a, Scalar c) {
  TapeT<Scalar>& t = *a.tape();
  int out = t.push(a.value() * c, t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out, c](TapeT<Scalar>& tt) {
    tt.accumulate(ai, tt.node(out).grad * c);
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> operator+(VarT<Scalar> a, VarT<Scalar> b) { return add(a, b); }
template <class Scalar>
VarT<Scalar> operator-(VarT<Scalar> a, VarT<Scalar> b) { return sub(a, b); }
template <class Scalar>
VarT<Scalar> operator*(VarT<Scalar> a, VarT<Scalar> b) { return matmul(a, b); }
template <class Scalar>
VarT<Scalar> operator*(Scalar c, VarT<Scalar> a) { return scale(a, c); }
template <class Scalar>
VarT<Scalar> operator-(VarT<Scalar> a) { return scale(a, Scalar(-1)); }

// Vertical stack.
template <class Scalar>
VarT<Scalar> concat_rows(const std::vector<VarT<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  TapeT<Scalar>& t = *parts[0].tape();
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::check_same_tape("concat_rows", parts[0], p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " +
                       shape_str(p.rows(), p.cols()) + " vs " +
                       shape_str(parts[0].rows(), cols));
    }
    rows += p.rows();
    rg = rg || t.requires_grad(p.index());
  }
  Mat<Scalar> v(rows, cols);
  Eigen::Index r = 0;
  std::vector<int> idx;
  std::vector<Eigen::Index> offsets;
  idx.reserve(parts.size());
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    idx.push_back(p.index());
    offsets.push_back(r);
    r += p.rows();
  }
  int out = t.push(std::move(v), rg);
  t.node(out).back = [idx, offsets, out](TapeT<Scalar>& tt) {
    const Mat<Scalar>& g = tt.node(out).grad;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Eigen::Index h = tt.value(idx[k]).rows();
      tt.accumulate(idx[k], g.middleRows(offsets[k], h));
    }
  };
  return VarT<Scalar>(&t, out);
}

// Horizontal stack.
template <class Scalar>
VarT<Scalar> concat_cols(const std::vector<VarT<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  TapeT<Scalar>& t = *parts[0].tape();
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::check_same_tape("concat_cols", parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " +
                       shape_str(p.rows(), p.cols()) + " vs " +
                       shape_str(rows, parts[0].cols()));
    }
    cols += p.cols();
    rg = rg || t.requires_grad(p.index());
  }
  Mat<Scalar> v(rows, cols);
  Eigen::Index c = 0;
  std::vector<int> idx;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    idx.push_back(p.index());
    offsets.push_back(c);
    c += p.cols();
  }
  int out = t.push(std::move(v), rg);
  t.node(out).back = [idx, offsets, out](TapeT<Scalar>& tt) {
    const Mat<Scalar>& g = tt.node(out).grad;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Eigen::Index w = tt.value(idx[k]).cols();
      tt.accumulate(idx[k], g.middleCols(offsets[k], w));
    }
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> slice_rows(VarT<Scalar> a, Eigen::Index first, Eigen::Index count) {
  TapeT<Scalar>& t = *a.tape();
  if (first < 0 || count < 0 || first + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of " +
                     shape_str(a.rows(), a.cols()));
  }
  int out = t.push(a.value().middleRows(first, count), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out, first, count](TapeT<Scalar>& tt) {
    Mat<Scalar> g = Mat<Scalar>::Zero(tt.value(ai).rows(), tt.value(ai).cols());
    g.middleRows(first, count) = tt.node(out).grad;
    tt.accumulate(ai, g);
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> tanh(VarT<Scalar> a) {
  return detail::unary_cwise(
      "tanh", a, [](Scalar x) { return std::tanh(x); },
      [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

template <class Scalar>
VarT<Scalar> sigmoid(VarT<Scalar> a) {
  return detail::unary_cwise(
      "sigmoid", a,
      [](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

// Clamps to [-1, 1]; the subgradient at |x| = 1 is 0.
template <class Scalar>
VarT<Scalar> hardtanh(VarT<Scalar> a) {
  TapeT<Scalar>& t = *a.tape();
  for (Eigen::Index c = 0; c < a.value().cols(); ++c) {
    for (Eigen::Index r = 0; r < a.value().rows(); ++r) {
      t.note_hardtanh_input(a.value()(r, c));
    }
  }
  return detail::unary_cwise(
      "hardtanh", a,
      [](Scalar x) { return x > Scalar(1) ? Scalar(1)
                          : x < Scalar(-1) ? Scalar(-1) : x; },
      [](Scalar x, Scalar) {
        return std::abs(x) < Scalar(1) ? Scalar(1) : Scalar(0);
      });
}

template <class Scalar>
VarT<Scalar> exp(VarT<Scalar> a) {
  return detail::unary_cwise(
      "exp", a, [](Scalar x) { return std::exp(x); },
      [](Scalar, Scalar y) { return y; });
}

template <class Scalar>
VarT<Scalar> log(VarT<Scalar> a) {
  return detail::unary_cwise(
      "log", a, [](Scalar x) { return std::log(x); },
      [](Scalar x, Scalar) { return Scalar(1) / x; });
}

template <class Scalar>
VarT<Scalar> abs(VarT<Scalar> a) {
  return detail::unary_cwise(
      "abs", a, [](Scalar x) { return std::abs(x); },
      [](Scalar x, Scalar) {
        return x > Scalar(0) ? Scalar(1) : x < Scalar(0) ? Scalar(-1) : Scalar(0);
      });
}

template <class Scalar>
VarT<Scalar> clamp_min(VarT<Scalar> a, Scalar floor) {
  return detail::unary_cwise(
      "clamp_min", a, [floor](Scalar x) { return x < floor ? floor : x; },
      [floor](Scalar x, Scalar) { return x >= floor ? Scalar(1) : Scalar(0); });
}

template <class Scalar>
VarT<Scalar> reciprocal(VarT<Scalar> a) {
  return detail::unary_cwise(
      "reciprocal", a, [](Scalar x) { return Scalar(1) / x; },
      [](Scalar, Scalar y) { return -y * y; });
}

// Softmax along axis 0 (down each column) or axis 1 (across each row).
template <class Scalar>
VarT<Scalar> softmax(VarT<Scalar> a, int axis = 0) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  TapeT<Scalar>& t = *a.tape();
  Mat<Scalar> v = a.value();
  if (axis == 0) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      auto col = v.col(c);
      col = (col.array() - col.maxCoeff()).exp();
      col /= col.sum();
    }
  } else {
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      auto row = v.row(r);
      row = (row.array() - row.maxCoeff()).exp();
      row /= row.sum();
    }
  }
  int out = t.push(std::move(v), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out, axis](TapeT<Scalar>& tt) {
    const Mat<Scalar>& y = tt.value(out);
    const Mat<Scalar>& g = tt.node(out).grad;
    Mat<Scalar> dx(y.rows(), y.cols());
    if (axis == 0) {
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        Scalar dot = y.col(c).dot(g.col(c));
        dx.col(c) = y.col(c).cwiseProduct((g.col(c).array() - dot).matrix());
      }
    } else {
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        Scalar dot = y.row(r).dot(g.row(r));
        dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
      }
    }
    tt.accumulate(ai, dx);
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> sum(VarT<Scalar> a) {
  TapeT<Scalar>& t = *a.tape();
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  int out = t.push(std::move(v), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out](TapeT<Scalar>& tt) {
    Scalar g = tt.node(out).grad(0, 0);
    tt.accumulate(ai, Mat<Scalar>::Constant(tt.value(ai).rows(),
                                            tt.value(ai).cols(), g));
  };
  return VarT<Scalar>(&t, out);
}

template <class Scalar>
VarT<Scalar> mean(VarT<Scalar> a) {
  Scalar inv = Scalar(1) / static_cast<Scalar>(a.value().size());
  return scale(sum(a), inv);
}

// Single coefficient as a 1x1 tensor.
template <class Scalar>
VarT<Scalar> pick(VarT<Scalar> a, Eigen::Index row, Eigen::Index col = 0) {
  TapeT<Scalar>& t = *a.tape();
  if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) {
    throw ShapeError("pick: (" + std::to_string(row) + "," + std::to_string(col) +
                     ") out of " + shape_str(a.rows(), a.cols()));
  }
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value()(row, col);
  int out = t.push(std::move(v), t.requires_grad(a.index()));
  int ai = a.index();
  t.node(out).back = [ai, out, row, col](TapeT<Scalar>& tt) {
    Mat<Scalar> g = Mat<Scalar>::Zero(tt.value(ai).rows(), tt.value(ai).cols());
    g(row, col) = tt.node(out).grad(0, 0);
    tt.accumulate(ai, g);
  };
  return VarT<Scalar>(&t, out);
}

// Inner product of two column vectors, as a 1x1 tensor.
template <class Scalar>
VarT<Scalar> dot(VarT<Scalar> a, VarT<Scalar> b) {
  detail::check_same_tape("dot", a, b);
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows()) {
    throw ShapeError("dot: needs equal-length column vectors, got " +
                     shape_str(a.rows(), a.cols()) + " and " +
                     shape_str(b.rows(), b.cols()));
  }
  TapeT<Scalar>& t = *a.tape();
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value().col(0).dot(b.value().col(0));
  int out = t.push(std::move(v), t.requires_grad(a.index()) ||
                                     t.requires_grad(b.index()));
  int ai = a.index(), bi = b.index();
  t.node(out).back = [ai, bi, out](TapeT<Scalar>& tt) {
    Scalar g = tt.node(out).grad(0, 0);
    tt.accumulate(ai, g * tt.value(bi));
    tt.accumulate(bi, g * tt.value(ai));
  };
  return VarT<Scalar>(&t, out);
}

// Embedding lookup: row `id` of the table, returned as a column vector.
template <class Scalar>
VarT<Scalar> lookup(VarT<Scalar> table, Eigen::Index id) {
  TapeT<Scalar>& t = *table.tape();
  if (id < 0 || id >= table.rows()) {
    throw ShapeError("lookup: row " + std::to_string(id) + " out of " +
                     shape_str(table.rows(), table.cols()));
  }
  int out = t.push(table.value().row(id).transpose(),
                   t.requires_grad(table.index()));
  int ti = table.index();
  t.node(out).back = [ti, out, id](TapeT<Scalar>& tt) {
    Mat<Scalar> g = Mat<Scalar>::Zero(tt.value(ti).rows(), tt.value(ti).cols());
    g.row(id) = tt.node(out).grad.transpose();
    tt.accumulate(ti, g);
  };
  return VarT<Scalar>(&t, out);
}

// Numerically stable -log softmax(logits)[target] for a column vector of
// logits.
template <class Scalar>
VarT<Scalar> cross_entropy(VarT<Scalar> logits, Eigen::Index target) {
  TapeT<Scalar>& t = *logits.tape();
  if (logits.cols() != 1) {
    throw ShapeError("cross_entropy: logits must be a column vector, got " +
                     shape_str(logits.rows(), logits.cols()));
  }
  if (target < 0 || target >= logits.rows()) {
    throw ShapeError("cross_entropy: target " + std::to_string(target) +
                     " out of " + std::to_string(logits.rows()) + " classes");
  }
  const auto& x = logits.value().col(0);
  Scalar m = x.maxCoeff();
  Scalar lse = m + std::log((x.array() - m).exp().sum());
  Mat<Scalar> v(1, 1);
  v(0, 0) = lse - x(target);
  int out = t.push(std::move(v), t.requires_grad(logits.index()));
  int li = logits.index();
  t.node(out).back = [li, out, target, lse](TapeT<Scalar>& tt) {
    Scalar g = tt.node(out).grad(0, 0);
    Mat<Scalar> dx = (tt.value(li).col(0).array() - lse).exp().matrix() * g;
    dx(target, 0) -= g;
    tt.accumulate(li, dx);
  };
  return VarT<Scalar>(&t, out);
}

// Forward identity whose gradient does not flow back (stop-gradient).
template <class Scalar>
VarT<Scalar> detach(VarT<Scalar> a) {
  return a.tape()->constant(a.value());
}

}  // namespace uparse::ad
