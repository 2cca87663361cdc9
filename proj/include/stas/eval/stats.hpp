#pragma once

#include <cstddef>
#include <span>

namespace stas::eval {

struct Correlation {
  double r = 0.0;
  // Two-tailed, from Student's t with n - 2 degrees of freedom.
  double p_value = 1.0;
  std::size_t n = 0;
  // Zero variance in either series or fewer than 3 pairs; r and p are
  // then meaningless (reported as 0 and 1).
  bool degenerate = false;
};

// Throws DimensionError when the series differ in length.
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Population mean and standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> values);

}  // namespace stas::eval
