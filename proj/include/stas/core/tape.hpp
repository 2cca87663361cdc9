#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "stas/core/tensor.hpp"

namespace stas {

class Gradients;
class Tape;
Gradients backward(const Tensor& loss, Tape& tape);

// Hands an op's backward function the adjoint buffers of its inputs.
// Buffers are zero-initialised on first request and accumulate.
class GradSink {
 public:
  virtual ~GradSink() = default;
  // Whether input k takes part in differentiation.
  virtual bool wants(std::size_t k) const = 0;
  // Adjoint buffer for input k; empty span when !wants(k).
  virtual std::span<double> grad(std::size_t k) = 0;
};

// out_grad is the adjoint of the op's output; accumulate into sink.grad(k).
using BackwardFn = std::function<void(std::span<const double> out_grad, GradSink& sink)>;

// Ordered record of the ops applied during a forward pass. Entries are
// appended in execution order, which is a topological order of the
// computation graph; backward() walks them in reverse.
//
// A tape and the tensors it records belong to one thread for the duration
// of a forward/backward pass. Distinct tapes may run concurrently even when
// they read the same parameters: adjoints live in the backward pass, never
// in the shared parameter storage.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  // A tape that never records; ops produce plain values.
  static Tape inference() { return Tape(false); }

  bool recording() const noexcept { return recording_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return entries_.size(); }

  // True when an op over these inputs must be recorded.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;
  bool tracks(std::span<const Tensor> inputs) const;

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn backward);

 private:
  friend Gradients backward(const Tensor& loss, Tape& tape);

  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  std::vector<Entry> entries_;
  bool recording_;
  bool consumed_ = false;
};

// Gradients of a scalar loss with respect to every leaf tensor that
// requires grad and is reachable from the loss.
class Gradients {
 public:
  bool has(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  std::span<const double> of(const Tensor& t) const;
  Tensor tensor_of(const Tensor& t) const;
  std::size_t count() const noexcept { return grads_.size(); }

  // Tape entry indices in the order backward visited them.
  const std::vector<std::size_t>& visit_order() const noexcept { return visit_order_; }

  // Adds other's gradients into this one (shard reduction).
  void accumulate(const Gradients& other);
  void scale(double factor);

  // Squared L2 norm over the given parameters (missing ones count as zero).
  double squared_norm(std::span<const Tensor> params) const;

 private:
  friend Gradients backward(const Tensor& loss, Tape& tape);
  friend class Backprop;

  struct Entry {
    Shape shape;
    std::vector<double> grad;
  };
  std::unordered_map<const TensorData*, Entry> grads_;
  std::vector<std::size_t> visit_order_;
};

// Reverse-mode sweep. Throws ContractError for a non-scalar loss and
// LifecycleError when the tape was already consumed. The tape is cleared.
Gradients backward(const Tensor& loss, Tape& tape);

}  // namespace stas
