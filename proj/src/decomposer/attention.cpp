#include "stas/decomposer/attention.hpp"

#include <cmath>

#include "stas/core/errors.hpp"

namespace stas::decomposer {

BatchLayout::BatchLayout(std::size_t agents, std::vector<std::size_t> lengths)
    : agents_(agents), lengths_(std::move(lengths)) {
  if (agents_ == 0) throw ContractError("batch layout needs at least one agent");
  step_offset_.reserve(lengths_.size());
  for (std::size_t len : lengths_) {
    if (len == 0) throw ContractError("batch layout: empty episode");
    step_offset_.push_back(steps_);
    steps_ += len;
  }
}

std::vector<std::size_t> BatchLayout::rows_per_episode() const {
  std::vector<std::size_t> out(lengths_.size());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = lengths_[b] * agents_;
  return out;
}

namespace {

struct Geometry {
  std::size_t d;
  std::size_t heads;
  std::size_t dh;
  double scale;
};

Geometry check(const Tensor& q, const Tensor& k, const Tensor* v, const BatchLayout& layout,
               std::size_t heads, const char* op) {
  if (q.rank() != 2 || q.shape() != k.shape() || (v && v->shape() != q.shape())) {
    throw DimensionError(std::string(op) + ": q, k, v must share one [rows x d] shape");
  }
  if (q.rows() != layout.rows()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(q.rows()) +
                         " rows for a layout of " + std::to_string(layout.rows()));
  }
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw DimensionError(std::string(op) + ": width " + std::to_string(d) +
                         " not divisible into " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  return {d, heads, dh, 1.0 / std::sqrt(static_cast<double>(dh))};
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t x = 0; x < n; ++x) s += a[x] * b[x];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

// Offsets of each episode's block of causal weights.
std::vector<std::size_t> temporal_offsets(const BatchLayout& layout, std::size_t heads) {
  std::vector<std::size_t> off(layout.episodes() + 1, 0);
  for (std::size_t b = 0; b < layout.episodes(); ++b) {
    const std::size_t T = layout.length(b);
    off[b + 1] = off[b] + layout.agents() * heads * T * (T + 1) / 2;
  }
  return off;
}

// Causal weights for (b, i, h) live at off[b] + (i * H + h) * T(T+1)/2, with
// row t starting at t(t+1)/2.
std::vector<double> temporal_forward(const double* q, const double* k, const BatchLayout& layout,
                                     const Geometry& g, const std::vector<std::size_t>& off) {
  std::vector<double> w(off.back());
  std::vector<double> logits;
  const std::size_t n = layout.agents();
  for (std::size_t b = 0; b < layout.episodes(); ++b) {
    const std::size_t T = layout.length(b);
    const std::size_t tri = T * (T + 1) / 2;
    logits.resize(T);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t h = 0; h < g.heads; ++h) {
        double* wb = w.data() + off[b] + (i * g.heads + h) * tri;
        for (std::size_t t = 0; t < T; ++t) {
          const double* qr = q + layout.row(b, t, i) * g.d + h * g.dh;
          for (std::size_t s = 0; s <= t; ++s) {
            logits[s] = g.scale * dot(qr, k + layout.row(b, s, i) * g.d + h * g.dh, g.dh);
          }
          softmax_row(std::span<const double>(logits.data(), t + 1), nullptr, MaskMode::NegInf,
                      std::span<double>(wb + t * (t + 1) / 2, t + 1));
        }
      }
    }
  }
  return w;
}

std::vector<double> spatial_forward(const double* q, const double* k, const BatchLayout& layout,
                                    const Geometry& g, const SpatialMasks& masks, MaskMode mode) {
  const std::size_t n = layout.agents();
  const std::size_t K = masks.samples;
  std::vector<double> w(layout.steps() * n * K * g.heads * n);
  std::vector<double> logits(n);
  for (std::size_t st = 0; st < layout.steps(); ++st) {
    const std::size_t base = st * n;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t h = 0; h < g.heads; ++h) {
        const double* qr = q + (base + i) * g.d + h * g.dh;
        for (std::size_t j = 0; j < n; ++j) {
          logits[j] = g.scale * dot(qr, k + (base + j) * g.d + h * g.dh, g.dh);
        }
        for (std::size_t s = 0; s < K; ++s) {
          const unsigned char* m = masks.bits.data() + ((st * n + i) * K + s) * n;
          softmax_row(logits, m, mode,
                      std::span<double>(w.data() + (((st * n + i) * K + s) * g.heads + h) * n, n));
        }
      }
    }
  }
  return w;
}

void check_masks(const BatchLayout& layout, const SpatialMasks& masks) {
  const std::size_t n = layout.agents();
  if (masks.samples == 0) throw ContractError("spatial_attention: need at least one coalition sample");
  if (masks.bits.size() != layout.steps() * n * masks.samples * n) {
    throw DimensionError("spatial_attention: mask buffer does not match the layout");
  }
  for (std::size_t st = 0; st < layout.steps(); ++st)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < masks.samples; ++s) {
        const unsigned char* m = masks.bits.data() + ((st * n + i) * masks.samples + s) * n;
        for (std::size_t j = 0; j < n; ++j) {
          if (m[j] > 1) throw ValidationError("coalition mask entries must be 0 or 1");
        }
        if (m[i] != 1) throw ValidationError("coalition mask must include its focal agent");
      }
}

}  // namespace

Tensor temporal_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                          const BatchLayout& layout, std::size_t heads) {
  const Geometry g = check(q, k, &v, layout, heads, "temporal_attention");
  const auto off = temporal_offsets(layout, heads);
  std::vector<double> w = temporal_forward(q.data().data(), k.data().data(), layout, g, off);

  const std::size_t n = layout.agents();
  std::vector<double> out(q.size(), 0.0);
  const double* vp = v.data().data();
  for (std::size_t b = 0; b < layout.episodes(); ++b) {
    const std::size_t T = layout.length(b);
    const std::size_t tri = T * (T + 1) / 2;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < g.heads; ++h) {
        const double* wb = w.data() + off[b] + (i * g.heads + h) * tri;
        for (std::size_t t = 0; t < T; ++t) {
          double* o = out.data() + layout.row(b, t, i) * g.d + h * g.dh;
          const double* wt = wb + t * (t + 1) / 2;
          for (std::size_t s = 0; s <= t; ++s) axpy(wt[s], vp + layout.row(b, s, i) * g.d + h * g.dh, o, g.dh);
        }
      }
  }
  require_finite(out, "temporal_attention");
  const bool tracked = tape.tracks({&q, &k, &v});
  Tensor result = Tensor::op_result(q.shape(), std::move(out), tracked);
  if (tracked) {
    tape.record({q, k, v}, result,
                [q, k, v, layout, g, off, w = std::move(w)](std::span<const double> go,
                                                            GradSink& sink) {
                  auto dq = sink.grad(0);
                  auto dk = sink.grad(1);
                  auto dv = sink.grad(2);
                  const bool want_q = sink.wants(0), want_k = sink.wants(1), want_v = sink.wants(2);
                  const double* qp = q.data().data();
                  const double* kp = k.data().data();
                  const double* vp = v.data().data();
                  const std::size_t n = layout.agents();
                  std::vector<double> dw, dl;
                  for (std::size_t b = 0; b < layout.episodes(); ++b) {
                    const std::size_t T = layout.length(b);
                    const std::size_t tri = T * (T + 1) / 2;
                    dw.resize(T);
                    dl.resize(T);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t h = 0; h < g.heads; ++h) {
                        const double* wb = w.data() + off[b] + (i * g.heads + h) * tri;
                        for (std::size_t t = 0; t < T; ++t) {
                          const std::size_t r = layout.row(b, t, i) * g.d + h * g.dh;
                          const double* gr = go.data() + r;
                          const double* wt = wb + t * (t + 1) / 2;
                          for (std::size_t s = 0; s <= t; ++s) {
                            const std::size_t rs = layout.row(b, s, i) * g.d + h * g.dh;
                            dw[s] = dot(gr, vp + rs, g.dh);
                            if (want_v) axpy(wt[s], gr, dv.data() + rs, g.dh);
                            dl[s] = 0.0;
                          }
                          if (!want_q && !want_k) continue;
                          softmax_row_backward(std::span<const double>(wt, t + 1),
                                               std::span<const double>(dw.data(), t + 1), nullptr,
                                               MaskMode::NegInf,
                                               std::span<double>(dl.data(), t + 1));
                          for (std::size_t s = 0; s <= t; ++s) {
                            const std::size_t rs = layout.row(b, s, i) * g.d + h * g.dh;
                            const double c = g.scale * dl[s];
                            if (want_q) axpy(c, kp + rs, dq.data() + r, g.dh);
                            if (want_k) axpy(c, qp + r, dk.data() + rs, g.dh);
                          }
                        }
                      }
                  }
                });
  }
  return result;
}

Tensor spatial_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                         const BatchLayout& layout, std::size_t heads, const SpatialMasks& masks,
                         MaskMode mode) {
  const Geometry g = check(q, k, &v, layout, heads, "spatial_attention");
  check_masks(layout, masks);
  std::vector<double> w = spatial_forward(q.data().data(), k.data().data(), layout, g, masks, mode);

  const std::size_t n = layout.agents();
  const std::size_t K = masks.samples;
  const double inv_k = 1.0 / static_cast<double>(K);
  std::vector<double> out(q.size(), 0.0);
  const double* vp = v.data().data();
  for (std::size_t st = 0; st < layout.steps(); ++st) {
    const std::size_t base = st * n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < g.heads; ++h) {
        double* o = out.data() + (base + i) * g.d + h * g.dh;
        for (std::size_t s = 0; s < K; ++s) {
          const double* ws = w.data() + (((st * n + i) * K + s) * g.heads + h) * n;
          for (std::size_t j = 0; j < n; ++j) {
            if (ws[j] != 0.0) axpy(inv_k * ws[j], vp + (base + j) * g.d + h * g.dh, o, g.dh);
          }
        }
      }
  }
  require_finite(out, "spatial_attention");
  const bool tracked = tape.tracks({&q, &k, &v});
  Tensor result = Tensor::op_result(q.shape(), std::move(out), tracked);
  if (tracked) {
    tape.record({q, k, v}, result,
                [q, k, v, layout, g, masks, mode, w = std::move(w)](std::span<const double> go,
                                                                    GradSink& sink) {
                  auto dq = sink.grad(0);
                  auto dk = sink.grad(1);
                  auto dv = sink.grad(2);
                  const bool want_q = sink.wants(0), want_k = sink.wants(1), want_v = sink.wants(2);
                  const double* qp = q.data().data();
                  const double* kp = k.data().data();
                  const double* vp = v.data().data();
                  const std::size_t n = layout.agents();
                  const std::size_t K = masks.samples;
                  const double inv_k = 1.0 / static_cast<double>(K);
                  std::vector<double> dvj(n), dw(n), dl(n);
                  for (std::size_t st = 0; st < layout.steps(); ++st) {
                    const std::size_t base = st * n;
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t h = 0; h < g.heads; ++h) {
                        const std::size_t ri = (base + i) * g.d + h * g.dh;
                        const double* gr = go.data() + ri;
                        // g . v_j is shared by every sample.
                        for (std::size_t j = 0; j < n; ++j) {
                          dvj[j] = inv_k * dot(gr, vp + (base + j) * g.d + h * g.dh, g.dh);
                        }
                        std::fill(dl.begin(), dl.end(), 0.0);
                        for (std::size_t s = 0; s < K; ++s) {
                          const double* ws = w.data() + (((st * n + i) * K + s) * g.heads + h) * n;
                          const unsigned char* m = masks.bits.data() + ((st * n + i) * K + s) * n;
                          if (want_v) {
                            for (std::size_t j = 0; j < n; ++j) {
                              if (ws[j] != 0.0) {
                                axpy(inv_k * ws[j], gr, dv.data() + (base + j) * g.d + h * g.dh, g.dh);
                              }
                            }
                          }
                          if (want_q || want_k) {
                            softmax_row_backward(std::span<const double>(ws, n), dvj, m, mode, dl);
                          }
                        }
                        if (!want_q && !want_k) continue;
                        for (std::size_t j = 0; j < n; ++j) {
                          const double c = g.scale * dl[j];
                          if (c == 0.0) continue;
                          const std::size_t rj = (base + j) * g.d + h * g.dh;
                          if (want_q) axpy(c, kp + rj, dq.data() + ri, g.dh);
                          if (want_k) axpy(c, qp + ri, dk.data() + rj, g.dh);
                        }
                      }
                  }
                });
  }
  return result;
}

std::vector<std::vector<double>> temporal_attention_weights(const Tensor& q, const Tensor& k,
                                                            const BatchLayout& layout,
                                                            std::size_t heads) {
  const Geometry g = check(q, k, nullptr, layout, heads, "temporal_attention_weights");
  const auto off = temporal_offsets(layout, heads);
  const std::vector<double> w = temporal_forward(q.data().data(), k.data().data(), layout, g, off);
  std::vector<std::vector<double>> out(layout.episodes());
  for (std::size_t b = 0; b < layout.episodes(); ++b) {
    const std::size_t T = layout.length(b);
    const std::size_t tri = T * (T + 1) / 2;
    out[b].assign(layout.agents() * heads * T * T, 0.0);
    for (std::size_t i = 0; i < layout.agents(); ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t s = 0; s <= t; ++s) {
            out[b][(i * heads + h) * T * T + t * T + s] =
                w[off[b] + (i * heads + h) * tri + t * (t + 1) / 2 + s];
          }
  }
  return out;
}

std::vector<double> spatial_attention_weights(const Tensor& q, const Tensor& k,
                                              const BatchLayout& layout, std::size_t heads,
                                              const SpatialMasks& masks, MaskMode mode) {
  const Geometry g = check(q, k, nullptr, layout, heads, "spatial_attention_weights");
  check_masks(layout, masks);
  return spatial_forward(q.data().data(), k.data().data(), layout, g, masks, mode);
}

}  // namespace stas::decomposer
