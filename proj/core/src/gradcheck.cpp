#include "warpgrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "warpgrad/error.hpp"
#include "warpgrad/rng.hpp"

namespace wg {

namespace {

double eval_scalar(const TapeFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, false));
  Var out = f(tape, vars);
  if (out.value().numel() != 1) {
    throw ContractError("gradcheck: f must be scalar-valued, got shape " +
                        out.value().shape_str());
  }
  return out.value()[0];
}

}  // namespace

GradCheckReport gradcheck(const TapeFn& f, const std::vector<Tensor>& inputs,
                          double step, double tolerance, double atol,
                          int max_elems_per_input, uint64_t subsample_seed) {
  if (step <= 0.0) throw ContractError("gradcheck: step must be positive");
  GradCheckReport report;

  // Determinism probe: identical evaluations must agree bitwise.
  const double v1 = eval_scalar(f, inputs);
  const double v2 = eval_scalar(f, inputs);
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
    report.pass = false;
    report.note = "f is not deterministic: repeated evaluation changed the value";
    return report;
  }

  // Analytic gradients from one tracked tape.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
  Var out = f(tape, vars);
  if (out.value().numel() != 1) {
    throw ContractError("gradcheck: f must be scalar-valued, got shape " +
                        out.value().shape_str());
  }
  tape.backward(out);

  Rng pick(subsample_seed);
  double err_sum = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = tape.grad(vars[k]);
    const int m = inputs[k].numel();
    std::vector<int> elems;
    if (max_elems_per_input > 0 && m > max_elems_per_input) {
      for (int i = 0; i < max_elems_per_input; ++i) {
        elems.push_back(static_cast<int>(pick.below(static_cast<uint64_t>(m))));
      }
      std::sort(elems.begin(), elems.end());
      elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
    } else {
      elems.resize(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) elems[static_cast<size_t>(i)] = i;
    }

    std::vector<Tensor> work = inputs;
    for (int idx : elems) {
      const double orig = work[k][idx];
      work[k][idx] = orig + step;
      const double fp = eval_scalar(f, work);
      work[k][idx] = orig - step;
      const double fm = eval_scalar(f, work);
      work[k][idx] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[idx];
      const double mag = std::max(std::fabs(a), std::fabs(numeric));
      const double rel = mag < atol ? 0.0 : std::fabs(a - numeric) / mag;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      err_sum += rel;
      ++report.checked_elements;
    }
  }
  report.mean_rel_err =
      report.checked_elements > 0 ? err_sum / report.checked_elements : 0.0;
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

const OpCheck* find_op_check(const std::string& name) {
  for (const OpCheck& c : op_checks()) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace wg
