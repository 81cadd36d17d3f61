#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sattn/tensor.hpp"

namespace sattn {

/// Learnable tensor with an accumulated gradient of identical shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of coarse primitives (matmul, softmax, conv, ...).
///
/// Each recorded node owns its forward value and a closure that reads its own
/// adjoint and accumulates into the adjoints of its inputs. `backward` replays
/// the closures in exact reverse order of recording, then flushes leaf adjoints
/// into the bound Parameters. A tape is single-use state: clear it between
/// forward passes.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Leaf bound to `p`; its adjoint is added into `p.grad` by `backward`.
  Var param(Parameter& p);
  /// Records a primitive. `fn` may be empty for values with no inputs.
  Var record(Tensor value, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws if the tape is empty or
  /// `loss` is not a scalar.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  /// Adjoint of node `id`, allocated to the value's shape on first touch.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  /// False for constants and for values computed only from constants.
  bool requires_grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param != nullptr || static_cast<bool>(n.backward);
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  /// Indices of replayed nodes from the most recent backward (for inspection).
  const std::vector<std::size_t>& last_replay_order() const { return replay_order_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> replay_order_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace sattn
