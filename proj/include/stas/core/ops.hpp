#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"

namespace stas {

// How a binary mask is applied to softmax logits.
enum class MaskMode {
  // Masked positions are excluded: weight exactly 0, survivors renormalise.
  NegInf,
  // Logits are multiplied by the mask before the softmax; a masked logit
  // becomes 0 and still receives weight exp(0) / Z.
  Hadamard,
};

const char* to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& name);

// Every op below records itself on `tape` when the tape is recording and at
// least one input requires grad. Outputs are checked for non-finite values.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor add_scalar(Tape& tape, const Tensor& a, double value);
// a [R x C] + row [C], broadcast over rows.
Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row);
// a [R x C] * column [R], broadcast over columns.
Tensor mul_col(Tape& tape, const Tensor& a, const Tensor& column);

Tensor relu(Tape& tape, const Tensor& a);
Tensor tanh(Tape& tape, const Tensor& a);
Tensor gelu(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);
Tensor square(Tape& tape, const Tensor& a);
Tensor clamp(Tape& tape, const Tensor& a, double lo, double hi);
Tensor minimum(Tape& tape, const Tensor& a, const Tensor& b);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
// Sum over the trailing axis: [R x C] -> [R].
Tensor row_sum(Tape& tape, const Tensor& a);
// Sums consecutive runs of rows: lengths must add up to a.rows().
// [R x C] -> [lengths.size() x C].
Tensor segment_sum(Tape& tape, const Tensor& a, std::span<const std::size_t> lengths);

Tensor softmax(Tape& tape, const Tensor& logits);
Tensor log_softmax(Tape& tape, const Tensor& logits);
// Row-wise softmax of logits under a binary mask. The mask has the same
// shape as logits or a single row of logits.cols() entries applied to every
// row. Throws ValidationError for non-binary masks and DegenerateRowError
// when a NegInf row has no survivor.
Tensor masked_softmax(Tape& tape, const Tensor& logits, const Tensor& mask, MaskMode mode);

// Per-row normalisation to zero mean / unit variance, then gain and bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// out[k] = table[indices[k]]; gradient scatters back.
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> indices);
// out[r] = a[r, indices[r]].
Tensor pick(Tape& tape, const Tensor& a, std::span<const std::size_t> indices);

Tensor reshape(Tape& tape, const Tensor& a, Shape shape);

// Kernel shared with fused attention ops: softmax of one row of logits under
// an optional mask (nullptr = unmasked). Returns weights in `out`.
void softmax_row(std::span<const double> logits, const unsigned char* mask, MaskMode mode,
                 std::span<double> out);
// Backward of softmax_row: accumulates dlogits from dweights.
void softmax_row_backward(std::span<const double> weights, std::span<const double> dweights,
                          const unsigned char* mask, MaskMode mode, std::span<double> dlogits);

// Throws NumericError if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* op);

}  // namespace stas
