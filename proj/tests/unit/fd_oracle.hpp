#pragma once

// Central finite-difference oracle for gradient checks. Independent of the
// reverse-mode path: it only ever calls the forward function on a
// non-recording tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"

namespace stas::testing {

struct FdReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_relative_error = 0.0;
};

// Relative error with a small floor on the denominator so that entries whose
// true gradient is zero compare on an absolute scale.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// forward(tape) must return a scalar loss built from `params`.
inline FdReport finite_difference_check(const std::function<Tensor(Tape&)>& forward,
                                        std::vector<Tensor> params, double step = 1e-4,
                                        double tolerance = 1e-3) {
  Tape tape;
  Tensor loss = forward(tape);
  Gradients grads = backward(loss, tape);

  FdReport report;
  for (Tensor& p : params) {
    auto values = p.mutable_data();
    std::vector<double> analytic(values.size(), 0.0);
    if (grads.has(p)) {
      auto g = grads.of(p);
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      Tape plus = Tape::inference();
      const double fp = forward(plus).item();
      values[k] = saved - step;
      Tape minus = Tape::inference();
      const double fm = forward(minus).item();
      values[k] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double err = relative_error(analytic[k], numeric);
      report.worst_relative_error = std::max(report.worst_relative_error, err);
      ++report.checked;
      if (err >= tolerance) ++report.failed;
    }
  }
  return report;
}

}  // namespace stas::testing
