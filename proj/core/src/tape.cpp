#include "warpgrad/tape.hpp"

#include <atomic>

#include "warpgrad/error.hpp"

namespace wg {

namespace {
#ifdef NDEBUG
std::atomic<bool> g_nan_checks{false};
#else
std::atomic<bool> g_nan_checks{true};
#endif
}  // namespace

bool Tape::nan_checks_enabled() { return g_nan_checks.load(std::memory_order_relaxed); }
void Tape::set_nan_checks(bool on) { g_nan_checks.store(on, std::memory_order_relaxed); }

const Tensor& Var::value() const {
  if (!valid()) throw ContractError("Var::value on an invalid handle");
  return tape->value(*this);
}

Tape::Node& Tape::node(Var v) {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  return const_cast<Tape*>(this)->node(v);
}

Var Tape::leaf(Tensor value, bool track) {
  Node n;
  n.value = std::move(value);
  n.tracked = track;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return Var{this, it->second};
  Var v = leaf(p.value, p.trainable);
  param_ids_.emplace(&p, v.id);
  return v;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
bool Tape::tracked(Var v) const { return node(v).tracked; }

Var Tape::emit(const char* op, Tensor value, const std::vector<Var>& inputs,
               BackwardFn backward) {
  bool tracked = false;
  for (const Var& in : inputs) {
    const Node& n = node(in);  // validates ownership and ordering
    tracked = tracked || n.tracked;
  }
  if (nan_checks_enabled() && !value.all_finite()) {
    throw NumericError(std::string("op '") + op + "' produced non-finite values");
  }
  Node n;
  n.value = std::move(value);
  n.tracked = tracked;
  n.op = op;
  if (tracked) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate_grad(int id, const Tensor& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.tracked) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
    return;
  }
  double* dst = n.grad.data();
  const double* src = g.data();
  const int m = n.grad.numel();
  for (int i = 0; i < m; ++i) dst[i] += src[i];
}

void Tape::accumulate_grad(int id, Tensor&& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.tracked) return;
  if (!n.has_grad) {
    n.grad = std::move(g);
    n.has_grad = true;
    return;
  }
  accumulate_grad(id, static_cast<const Tensor&>(g));
}

void Tape::backward(Var loss) {
  Node& l = node(loss);
  if (consumed_) {
    throw ContractError("backward() called twice: the tape is consumed");
  }
  if (l.value.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        l.value.shape_str());
  }
  consumed_ = true;
  if (!l.tracked) return;  // nothing reaches any tracked leaf
  accumulate_grad(loss.id, Tensor::ones({1}));
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.tracked && n.has_grad && n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

const Tensor& Tape::grad(Var v) {
  Node& n = node(v);
  if (!consumed_) throw ContractError("grad() queried before backward()");
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor* Tape::grad_if(Var v) const {
  const Node& n = node(v);
  return n.has_grad ? &n.grad : nullptr;
}

const Tensor* Tape::grad_for(const Parameter& p) const {
  auto it = param_ids_.find(&p);
  if (it == param_ids_.end()) return nullptr;
  const Node& n = nodes_[static_cast<size_t>(it->second)];
  return n.has_grad ? &n.grad : nullptr;
}

}  // namespace wg
