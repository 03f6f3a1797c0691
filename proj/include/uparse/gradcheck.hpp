#pragma once

// Central-difference gradient verification for losses built on a TapeT.

#include <cmath>
#include <string>

#include "uparse/autodiff.hpp"
#include "uparse/errors.hpp"

namespace uparse::ad {

template <class Scalar>
struct GradCheckReport {
  Scalar max_rel_error = 0;
  std::string worst_param;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
};

// Compares reverse-mode gradients of loss_fn against central finite
// differences, coordinate by coordinate. loss_fn receives a fresh tape and
// returns a scalar Var; it must read parameters through tape.param(...).
// The relative error is |a - b| / max(|a|, |b|, 1e-8).
template <class Scalar, class LossFn>
GradCheckReport<Scalar> gradient_check_report(ParamStoreT<Scalar>& params,
                                              LossFn loss_fn, Scalar eps) {
  if (!(eps > Scalar(0))) throw DataError("gradient_check: eps must be > 0");

  auto eval = [&](bool want_grad) -> Scalar {
    TapeT<Scalar> tape(params);
    VarT<Scalar> loss = loss_fn(tape);
    Scalar v = loss.scalar_value();
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericError("gradient_check: loss is not finite");
    }
    if (want_grad) tape.backward(loss);
    return v;
  };

  params.zero_grads();
  eval(true);
  std::vector<Mat<Scalar>> analytic;
  for (auto* p : params.all()) analytic.push_back(p->grad);

  GradCheckReport<Scalar> report;
  auto all = params.all();
  for (std::size_t pi = 0; pi < all.size(); ++pi) {
    Mat<Scalar>& value = all[pi]->value;
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        Scalar saved = value(r, c);
        value(r, c) = saved + eps;
        Scalar up = eval(false);
        value(r, c) = saved - eps;
        Scalar down = eval(false);
        value(r, c) = saved;
        Scalar numeric = (up - down) / (Scalar(2) * eps);
        Scalar a = analytic[pi](r, c);
        Scalar denom = std::max(
            {std::abs(a), std::abs(numeric), Scalar(1e-8)});
        Scalar rel = std::abs(a - numeric) / denom;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = all[pi]->name;
          report.worst_row = r;
          report.worst_col = c;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  params.zero_grads();
  return report;
}

template <class Scalar, class LossFn>
Scalar gradient_check(ParamStoreT<Scalar>& params, LossFn loss_fn, Scalar eps) {
  return gradient_check_report(params, loss_fn, eps).max_rel_error;
}

// Copies parameter values by name, casting between scalar widths.
template <class From, class To>
void copy_param_values(const ParamStoreT<From>& src, ParamStoreT<To>& dst) {
  for (const auto* p : src.all()) {
    auto& q = dst.at(p->name);
    if (q.value.rows() != p->value.rows() || q.value.cols() != p->value.cols()) {
      throw ShapeError("copy_param_values: " + p->name + " shapes differ");
    }
    for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
        q.value(r, c) = static_cast<To>(p->value(r, c));
      }
    }
  }
}

// Same comparison as gradient_check, but the central-difference oracle is
// evaluated at extended precision so its own rounding noise (one ulp of the
// loss divided by 2*eps) stays far below the 1e-8 denominator floor. The
// gradients under test are still the 64-bit engine's. wide_params is
// overwritten with params' values before probing.
template <class LossFn, class WideLossFn>
GradCheckReport<double> gradient_check_wide(ParamStoreT<double>& params,
                                            LossFn loss_fn,
                                            ParamStoreT<long double>& wide_params,
                                            WideLossFn wide_loss_fn, double eps) {
  if (!(eps > 0)) throw DataError("gradient_check: eps must be > 0");
  copy_param_values(params, wide_params);

  params.zero_grads();
  {
    TapeT<double> tape(params);
    VarT<double> loss = loss_fn(tape);
    if (!std::isfinite(loss.scalar_value())) {
      throw NumericError("gradient_check: loss is not finite");
    }
    tape.backward(loss);
  }
  std::vector<Mat<double>> analytic;
  for (auto* p : params.all()) analytic.push_back(p->grad);

  auto eval_wide = [&]() -> long double {
    TapeT<long double> tape(wide_params);
    VarT<long double> loss = wide_loss_fn(tape);
    long double v = loss.scalar_value();
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericError("gradient_check: loss is not finite");
    }
    return v;
  };

  GradCheckReport<double> report;
  auto all = wide_params.all();
  long double weps = static_cast<long double>(eps);
  for (std::size_t pi = 0; pi < all.size(); ++pi) {
    Mat<long double>& value = all[pi]->value;
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        long double saved = value(r, c);
        value(r, c) = saved + weps;
        long double up = eval_wide();
        value(r, c) = saved - weps;
        long double down = eval_wide();
        value(r, c) = saved;
        double numeric = static_cast<double>((up - down) / (2 * weps));
        double a = analytic[pi](r, c);
        double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        double rel = std::abs(a - numeric) / denom;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = all[pi]->name;
          report.worst_row = r;
          report.worst_col = c;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  params.zero_grads();
  return report;
}

}  // namespace uparse::ad
