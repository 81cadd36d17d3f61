#include "sattn/autodiff.hpp"

#include "sattn/errors.hpp"

namespace sattn {

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  Var v = record(p.value, nullptr);
  nodes_.back().param = &p;
  return v;
}

Var Tape::record(Tensor value, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(fn), nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw std::logic_error("backward called on an empty tape");
  if (&loss.tape() != this) throw std::logic_error("loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  }
  grad(loss.id())[0] = 1.0;
  replay_order_.clear();
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      replay_order_.push_back(i);
      n.backward(*this, i);
    }
    if (n.param != nullptr) {
      auto& g = n.param->grad.storage();
      const auto& a = n.grad.storage();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += a[k];
    }
  }
}

}  // namespace sattn
