#include "stas/core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "stas/core/errors.hpp"

namespace stas {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

Tensor finish(Tape& tape, Shape shape, std::vector<double> values, bool tracked, const char* op) {
  require_finite(values, op);
  (void)tape;
  return Tensor::op_result(std::move(shape), std::move(values), tracked);
}

template <typename F, typename G>
Tensor unary(Tape& tape, const Tensor& a, const char* name, F forward, G derivative) {
  const bool tracked = tape.tracks({&a});
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, name);
  if (tracked) {
    tape.record({a}, result, [a, result, derivative](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      auto x = a.data();
      auto y = result.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
    });
  }
  return result;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

const char* to_string(MaskMode mode) {
  return mode == MaskMode::NegInf ? "neg_inf" : "hadamard";
}

MaskMode mask_mode_from_string(const std::string& name) {
  if (name == "neg_inf") return MaskMode::NegInf;
  if (name == "hadamard") return MaskMode::Hadamard;
  throw ConfigError("mask_mode", "unknown mask mode '" + name + "'");
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in output");
  }
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: operands must be rank 2, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const bool tracked = tape.tracks({&a, &b});
  std::vector<double> out(m * n);
  ConstMap A(a.data().data(), m, k);
  ConstMap B(b.data().data(), k, n);
  MutMap C(out.data(), m, n);
  C.noalias() = A * B;
  Tensor result = finish(tape, Shape{m, n}, std::move(out), tracked, "matmul");
  if (tracked) {
    tape.record({a, b}, result, [a, b, m, k, n](std::span<const double> g, GradSink& sink) {
      ConstMap G(g.data(), m, n);
      if (sink.wants(0)) {
        MutMap GA(sink.grad(0).data(), m, k);
        GA.noalias() += G * ConstMap(b.data().data(), k, n).transpose();
      }
      if (sink.wants(1)) {
        MutMap GB(sink.grad(1).data(), k, n);
        GB.noalias() += ConstMap(a.data().data(), m, k).transpose() * G;
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool tracked = tape.tracks({&a, &b});
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "add");
  if (tracked) {
    tape.record({a, b}, result, [](std::span<const double> g, GradSink& sink) {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!sink.wants(k)) continue;
        auto gk = sink.grad(k);
        for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const bool tracked = tape.tracks({&a, &b});
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "sub");
  if (tracked) {
    tape.record({a, b}, result, [](std::span<const double> g, GradSink& sink) {
      if (sink.wants(0)) {
        auto ga = sink.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
      if (sink.wants(1)) {
        auto gb = sink.grad(1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool tracked = tape.tracks({&a, &b});
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "mul");
  if (tracked) {
    tape.record({a, b}, result, [a, b](std::span<const double> g, GradSink& sink) {
      if (sink.wants(0)) {
        auto ga = sink.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (sink.wants(1)) {
        auto gb = sink.grad(1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  return unary(
      tape, a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(Tape& tape, const Tensor& a, double value) {
  return unary(
      tape, a, "add_scalar", [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row) {
  const std::size_t r = a.rows(), c = a.cols();
  if (row.size() != c) {
    throw DimensionError("add_row: row of " + std::to_string(row.size()) + " for " +
                         std::to_string(c) + " columns");
  }
  const bool tracked = tape.tracks({&a, &row});
  std::vector<double> out(a.size());
  auto x = a.data();
  auto b = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + b[j];
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "add_row");
  if (tracked) {
    tape.record({a, row}, result, [r, c](std::span<const double> g, GradSink& sink) {
      if (sink.wants(0)) {
        auto ga = sink.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
      if (sink.wants(1)) {
        auto gb = sink.grad(1);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
      }
    });
  }
  return result;
}

Tensor mul_col(Tape& tape, const Tensor& a, const Tensor& column) {
  const std::size_t r = a.rows(), c = a.cols();
  if (column.size() != r) {
    throw DimensionError("mul_col: column of " + std::to_string(column.size()) + " for " +
                         std::to_string(r) + " rows");
  }
  const bool tracked = tape.tracks({&a, &column});
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a[i * c + j] * column[i];
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "mul_col");
  if (tracked) {
    tape.record({a, column}, result, [a, column, r, c](std::span<const double> g, GradSink& sink) {
      if (sink.wants(0)) {
        auto ga = sink.grad(0);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * column[i];
      }
      if (sink.wants(1)) {
        auto gc = sink.grad(1);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gc[i] += g[i * c + j] * a[i * c + j];
      }
    });
  }
  return result;
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      });
}

Tensor exp(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor clamp(Tape& tape, const Tensor& a, double lo, double hi) {
  return unary(
      tape, a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Tensor minimum(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  const bool tracked = tape.tracks({&a, &b});
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
  Tensor result = finish(tape, a.shape(), std::move(out), tracked, "minimum");
  if (tracked) {
    // Ties route the gradient to the first operand.
    tape.record({a, b}, result, [a, b](std::span<const double> g, GradSink& sink) {
      if (sink.wants(0)) {
        auto ga = sink.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i)
          if (a[i] <= b[i]) ga[i] += g[i];
      }
      if (sink.wants(1)) {
        auto gb = sink.grad(1);
        for (std::size_t i = 0; i < gb.size(); ++i)
          if (a[i] > b[i]) gb[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  const bool tracked = tape.tracks({&a});
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor result = finish(tape, Shape{}, {s}, tracked, "sum");
  if (tracked) {
    tape.record({a}, result, [](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      for (double& v : ga) v += g[0];
    });
  }
  return result;
}

Tensor mean(Tape& tape, const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of empty tensor");
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(Tape& tape, const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  const bool tracked = tape.tracks({&a});
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += a[i * c + j];
  Tensor result = finish(tape, Shape{r}, std::move(out), tracked, "row_sum");
  if (tracked) {
    tape.record({a}, result, [r, c](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
    });
  }
  return result;
}

Tensor segment_sum(Tape& tape, const Tensor& a, std::span<const std::size_t> lengths) {
  const std::size_t r = a.rows(), c = a.cols();
  std::size_t total = 0;
  for (std::size_t len : lengths) total += len;
  if (total != r) throw DimensionError("segment_sum: segment lengths do not cover the rows");
  const bool tracked = tape.tracks({&a});
  std::vector<double> out(lengths.size() * c, 0.0);
  std::size_t row = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    for (std::size_t k = 0; k < lengths[s]; ++k, ++row)
      for (std::size_t j = 0; j < c; ++j) out[s * c + j] += a[row * c + j];
  }
  Tensor result = finish(tape, Shape{lengths.size(), c}, std::move(out), tracked, "segment_sum");
  if (tracked) {
    std::vector<std::size_t> lens(lengths.begin(), lengths.end());
    tape.record({a}, result, [lens, c](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      std::size_t row = 0;
      for (std::size_t s = 0; s < lens.size(); ++s)
        for (std::size_t k = 0; k < lens[s]; ++k, ++row)
          for (std::size_t j = 0; j < c; ++j) ga[row * c + j] += g[s * c + j];
    });
  }
  return result;
}

void softmax_row(std::span<const double> logits, const unsigned char* mask, MaskMode mode,
                 std::span<double> out) {
  const std::size_t n = logits.size();
  if (mask == nullptr || mode == MaskMode::Hadamard) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = mask ? logits[j] * mask[j] : logits[j];
      mx = std::max(mx, out[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(out[j] - mx);
      z += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= z;
    return;
  }
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (mask[j]) {
      mx = std::max(mx, logits[j]);
      any = true;
    }
  }
  if (!any) throw DegenerateRowError("masked_softmax: every position of a row is masked");
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = mask[j] ? std::exp(logits[j] - mx) : 0.0;
    z += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= z;
}

void softmax_row_backward(std::span<const double> weights, std::span<const double> dweights,
                          const unsigned char* mask, MaskMode mode, std::span<double> dlogits) {
  const std::size_t n = weights.size();
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += weights[j] * dweights[j];
  for (std::size_t j = 0; j < n; ++j) {
    double dz = weights[j] * (dweights[j] - dot);
    if (mask && mode == MaskMode::Hadamard) dz *= mask[j];
    dlogits[j] += dz;
  }
}

namespace {

std::vector<unsigned char> binary_mask(const Tensor& mask, const Tensor& logits) {
  if (mask.size() != logits.size() && mask.size() != logits.cols()) {
    throw DimensionError("masked_softmax: mask " + shape_string(mask.shape()) +
                         " does not fit logits " + shape_string(logits.shape()));
  }
  std::vector<unsigned char> bits(mask.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const double m = mask[i];
    if (m != 0.0 && m != 1.0) {
      throw ValidationError("masked_softmax: mask entry " + std::to_string(m) + " is not 0 or 1");
    }
    bits[i] = m == 1.0;
  }
  return bits;
}

Tensor softmax_impl(Tape& tape, const Tensor& logits, std::vector<unsigned char> bits,
                    MaskMode mode, const char* name) {
  const std::size_t r = logits.rows(), c = logits.cols();
  const bool per_row = bits.size() == logits.size() && r > 1;
  const bool masked = !bits.empty();
  auto row_mask = [&bits, per_row, masked, c](std::size_t i) -> const unsigned char* {
    if (!masked) return nullptr;
    return per_row ? bits.data() + i * c : bits.data();
  };
  const bool tracked = tape.tracks({&logits});
  std::vector<double> out(logits.size());
  auto x = logits.data();
  for (std::size_t i = 0; i < r; ++i)
    softmax_row(x.subspan(i * c, c), row_mask(i), mode, std::span(out).subspan(i * c, c));
  Tensor result = finish(tape, logits.shape(), std::move(out), tracked, name);
  if (tracked) {
    tape.record({logits}, result,
                [result, bits = std::move(bits), per_row, masked, mode, r, c](
                    std::span<const double> g, GradSink& sink) {
                  auto ga = sink.grad(0);
                  auto y = result.data();
                  for (std::size_t i = 0; i < r; ++i) {
                    const unsigned char* m =
                        masked ? (per_row ? bits.data() + i * c : bits.data()) : nullptr;
                    softmax_row_backward(y.subspan(i * c, c), g.subspan(i * c, c), m, mode,
                                         ga.subspan(i * c, c));
                  }
                });
  }
  return result;
}

}  // namespace

Tensor softmax(Tape& tape, const Tensor& logits) {
  return softmax_impl(tape, logits, {}, MaskMode::NegInf, "softmax");
}

Tensor masked_softmax(Tape& tape, const Tensor& logits, const Tensor& mask, MaskMode mode) {
  return softmax_impl(tape, logits, binary_mask(mask, logits), mode, "masked_softmax");
}

Tensor log_softmax(Tape& tape, const Tensor& logits) {
  const std::size_t r = logits.rows(), c = logits.cols();
  const bool tracked = tape.tracks({&logits});
  std::vector<double> out(logits.size());
  auto x = logits.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[i * c + j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] - lz;
  }
  Tensor result = finish(tape, logits.shape(), std::move(out), tracked, "log_softmax");
  if (tracked) {
    tape.record({logits}, result, [result, r, c](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      auto y = result.data();
      for (std::size_t i = 0; i < r; ++i) {
        double gs = 0.0;
        for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          ga[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
      }
    });
  }
  return result;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c) throw DimensionError("layer_norm: gain/bias extent");
  const bool tracked = tape.tracks({&x, &gain, &bias});
  std::vector<double> out(x.size());
  std::vector<double> normed(x.size());
  std::vector<double> inv_std(r);
  auto in = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += in[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = in[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      normed[i * c + j] = (in[i * c + j] - mu) * inv_std[i];
      out[i * c + j] = normed[i * c + j] * gain[j] + bias[j];
    }
  }
  Tensor result = finish(tape, x.shape(), std::move(out), tracked, "layer_norm");
  if (tracked) {
    tape.record({x, gain, bias}, result,
                [gain, normed = std::move(normed), inv_std = std::move(inv_std), r, c](
                    std::span<const double> g, GradSink& sink) {
                  if (sink.wants(1)) {
                    auto gg = sink.grad(1);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * normed[i * c + j];
                  }
                  if (sink.wants(2)) {
                    auto gb = sink.grad(2);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                  }
                  if (sink.wants(0)) {
                    auto gx = sink.grad(0);
                    const double inv_c = 1.0 / static_cast<double>(c);
                    for (std::size_t i = 0; i < r; ++i) {
                      double m1 = 0.0, m2 = 0.0;
                      for (std::size_t j = 0; j < c; ++j) {
                        const double dn = g[i * c + j] * gain[j];
                        m1 += dn;
                        m2 += dn * normed[i * c + j];
                      }
                      m1 *= inv_c;
                      m2 *= inv_c;
                      for (std::size_t j = 0; j < c; ++j) {
                        const double dn = g[i * c + j] * gain[j];
                        gx[i * c + j] += inv_std[i] * (dn - m1 - normed[i * c + j] * m2);
                      }
                    }
                  }
                });
  }
  return result;
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> indices) {
  const std::size_t rows = table.rows(), c = table.cols();
  for (std::size_t idx : indices) {
    if (idx >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) + " outside table of " +
                           std::to_string(rows) + " rows");
    }
  }
  const bool tracked = tape.tracks({&table});
  std::vector<double> out(indices.size() * c);
  auto t = table.data();
  for (std::size_t k = 0; k < indices.size(); ++k)
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(indices[k] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(k * c));
  Tensor result = finish(tape, Shape{indices.size(), c}, std::move(out), tracked, "gather_rows");
  if (tracked) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape.record({table}, result, [idx = std::move(idx), c](std::span<const double> g, GradSink& sink) {
      auto gt = sink.grad(0);
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < c; ++j) gt[idx[k] * c + j] += g[k * c + j];
    });
  }
  return result;
}

Tensor pick(Tape& tape, const Tensor& a, std::span<const std::size_t> indices) {
  const std::size_t r = a.rows(), c = a.cols();
  if (indices.size() != r) throw DimensionError("pick: one index per row required");
  for (std::size_t idx : indices) {
    if (idx >= c) throw DimensionError("pick: column index out of range");
  }
  const bool tracked = tape.tracks({&a});
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = a[i * c + indices[i]];
  Tensor result = finish(tape, Shape{r}, std::move(out), tracked, "pick");
  if (tracked) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape.record({a}, result, [idx = std::move(idx), c](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      for (std::size_t i = 0; i < idx.size(); ++i) ga[i * c + idx[i]] += g[i];
    });
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  const bool tracked = tape.tracks({&a});
  std::vector<double> out(a.data().begin(), a.data().end());
  Tensor result = finish(tape, std::move(shape), std::move(out), tracked, "reshape");
  if (tracked) {
    tape.record({a}, result, [](std::span<const double> g, GradSink& sink) {
      auto ga = sink.grad(0);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    });
  }
  return result;
}

}  // namespace stas
