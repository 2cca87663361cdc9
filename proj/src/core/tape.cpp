#include "stas/core/tape.hpp"

#include "stas/core/errors.hpp"

namespace stas {

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool Tape::tracks(std::span<const Tensor> inputs) const {
  if (!recording_) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn backward) {
  if (consumed_) throw LifecycleError("record on a consumed tape");
  if (!recording_) return;
  entries_.push_back(Entry{std::move(inputs), output, std::move(backward)});
}

std::span<const double> Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) throw ContractError("no gradient for tensor " + shape_string(t.shape()));
  return it->second.grad;
}

Tensor Gradients::tensor_of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) throw ContractError("no gradient for tensor " + shape_string(t.shape()));
  return Tensor(it->second.shape, it->second.grad);
}

void Gradients::accumulate(const Gradients& other) {
  for (const auto& [key, entry] : other.grads_) {
    auto it = grads_.find(key);
    if (it == grads_.end()) {
      grads_.emplace(key, entry);
      continue;
    }
    auto& g = it->second.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += entry.grad[i];
  }
}

void Gradients::scale(double factor) {
  for (auto& [key, entry] : grads_) {
    for (double& g : entry.grad) g *= factor;
  }
}

double Gradients::squared_norm(std::span<const Tensor> params) const {
  double s = 0.0;
  for (const Tensor& p : params) {
    auto it = grads_.find(p.id());
    if (it == grads_.end()) continue;
    for (double g : it->second.grad) s += g * g;
  }
  return s;
}

class Backprop final : public GradSink {
 public:
  explicit Backprop(std::unordered_map<const TensorData*, std::vector<double>>& adjoints)
      : adjoints_(adjoints) {}

  void bind(const std::vector<Tensor>* inputs) { inputs_ = inputs; }

  bool wants(std::size_t k) const override { return (*inputs_)[k].requires_grad(); }

  std::span<double> grad(std::size_t k) override {
    const Tensor& in = (*inputs_)[k];
    if (!in.requires_grad()) return {};
    auto& buf = adjoints_[in.id()];
    if (buf.empty()) buf.assign(in.size(), 0.0);
    return buf;
  }

 private:
  std::unordered_map<const TensorData*, std::vector<double>>& adjoints_;
  const std::vector<Tensor>* inputs_ = nullptr;
};

Gradients backward(const Tensor& loss, Tape& tape) {
  if (tape.consumed()) throw LifecycleError("backward on a consumed tape");
  if (loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  Gradients out;
  std::unordered_map<const TensorData*, std::vector<double>> adjoints;
  std::unordered_map<const TensorData*, Shape> leaf_shapes;
  if (loss.requires_grad()) {
    adjoints[loss.id()] = {1.0};
    if (loss.is_leaf()) leaf_shapes[loss.id()] = loss.shape();
  }

  Backprop sink(adjoints);
  auto& entries = tape.entries_;
  for (std::size_t n = entries.size(); n-- > 0;) {
    auto& e = entries[n];
    auto it = adjoints.find(e.output.id());
    if (it == adjoints.end()) continue;
    std::vector<double> out_grad = std::move(it->second);
    adjoints.erase(it);
    sink.bind(&e.inputs);
    e.backward(out_grad, sink);
    for (const Tensor& in : e.inputs) {
      if (in.requires_grad() && in.is_leaf()) leaf_shapes.emplace(in.id(), in.shape());
    }
    out.visit_order_.push_back(n);
  }

  for (auto& [key, shape] : leaf_shapes) {
    auto it = adjoints.find(key);
    if (it == adjoints.end()) continue;
    out.grads_.emplace(key, Gradients::Entry{shape, std::move(it->second)});
  }
  entries.clear();
  tape.consumed_ = true;
  return out;
}

}  // namespace stas
