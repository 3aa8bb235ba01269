#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "warpgrad/tape.hpp"

namespace wg {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  int checked_elements = 0;
  bool pass = false;
  std::string note;
};

// Builds a scalar loss from tracked leaves for the given inputs.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares the tape's analytic gradient against central finite differences
// (f(x+h) - f(x-h)) / 2h, elementwise. Relative error for an element is
// |a - n| / max(|a|, |n|), taken as 0 when both magnitudes are below `atol`
// (the difference quotient cannot resolve gradients under the fd noise
// floor). f is evaluated twice up front; a bitwise mismatch fails the check
// with a nondeterminism note.
GradCheckReport gradcheck(const TapeFn& f, const std::vector<Tensor>& inputs,
                          double step, double tolerance, double atol = 1e-6,
                          int max_elems_per_input = -1,
                          uint64_t subsample_seed = 0);

// Named, seeded gradient checks covering every differentiable op in the
// library. Used by the CLI `gradcheck` command and the acceptance suite.
struct OpCheck {
  std::string name;
  bool sampling = false;  // sampling ops check at 1e-4, the rest at 1e-5
  std::function<GradCheckReport(uint64_t seed, double tol)> run;
};

const std::vector<OpCheck>& op_checks();
const OpCheck* find_op_check(const std::string& name);

}  // namespace wg
