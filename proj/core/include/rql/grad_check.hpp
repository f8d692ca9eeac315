#ifndef RQL_GRAD_CHECK_HPP
#define RQL_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>

#include "rql/tensor.hpp"

namespace rql {

// Central finite differences: perturbs each coordinate of `point` in place
// (restoring it afterwards), evaluates the scalar loss through `f`, and
// compares against the analytic gradient. Relative error per coordinate uses
// a max(|a|, |b|, 1e-8) denominator; the max over coordinates is returned.
//
// `f` is invoked with no arguments and must read the current contents of
// `point` (capture it by reference). Run in double precision; the central
// difference itself carries O(eps^2) truncation error.
template <typename F>
double grad_check(F&& f, Tensor<double>& point,
                  const Tensor<double>& analytic_grad, double eps = 1e-5) {
  if (!point.same_shape(analytic_grad)) {
    throw ShapeError("grad_check: analytic gradient " +
                     analytic_grad.shape_string() + " does not match point " +
                     point.shape_string());
  }
  double max_rel = 0.0;
  for (size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f();
    point[i] = saved - eps;
    const double down = f();
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
  }
  return max_rel;
}

}  // namespace rql

#endif  // RQL_GRAD_CHECK_HPP
