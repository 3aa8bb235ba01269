#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "warpgrad/tensor.hpp"

namespace wg {

class Tape;

// Named trainable tensor. Names must be unique within a model.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
};

// Reverse-mode tape. Ops append nodes in topological order; backward() walks
// the record once, accumulating gradients, and consumes the tape. One tape
// per forward pass, confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // track=true makes the leaf a gradient root (parameters, gradcheck inputs).
  Var leaf(Tensor value, bool track = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  // Tracked leaf for a parameter; repeated calls on the same tape reuse the
  // node so gradients from every use accumulate in one place.
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  bool tracked(Var v) const;
  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Runs the recorded ops in reverse. `loss` must be scalar; the tape is
  // consumed and a second call throws ContractError.
  void backward(Var loss);

  // Gradient of the backward()'d loss wrt a node; zeros if nothing reached it.
  const Tensor& grad(Var v);
  const Tensor* grad_if(Var v) const;  // nullptr if no gradient flowed
  const Tensor* grad_for(const Parameter& p) const;

  // --- op-author interface ---
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
  // Appends a node. `backward` may be empty for non-differentiable outputs;
  // it is dropped when no input is tracked.
  Var emit(const char* op, Tensor value, const std::vector<Var>& inputs,
           BackwardFn backward);
  void accumulate_grad(int id, const Tensor& g);
  // Fast path used by backward rules that produce a fresh tensor.
  void accumulate_grad(int id, Tensor&& g);

  // Debug-mode screening: every emitted value is scanned for NaN/Inf.
  static bool nan_checks_enabled();
  static void set_nan_checks(bool on);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool tracked = false;
    const char* op = "leaf";
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
  bool consumed_ = false;
};

}  // namespace wg
