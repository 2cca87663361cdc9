#include "stas/eval/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <string>

#include "stas/core/errors.hpp"

namespace stas::eval {

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("pearson: series lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
  Correlation c;
  c.n = x.size();
  // Streaming co-moments.
  double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < c.n; ++k) {
    const double w = static_cast<double>(k + 1);
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    mx += dx / w;
    my += dy / w;
    sxx += dx * (x[k] - mx);
    syy += dy * (y[k] - my);
    sxy += dx * (y[k] - my);
  }
  if (c.n < 3 || !(sxx > 0.0) || !(syy > 0.0)) {
    c.degenerate = true;
    return c;
  }
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(c.n - 2);
  const double one_minus = 1.0 - c.r * c.r;
  if (one_minus <= 0.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = std::abs(c.r) * std::sqrt(df / one_minus);
  boost::math::students_t dist(df);
  c.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
  return c;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

}  // namespace stas::eval
