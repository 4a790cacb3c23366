#pragma once

#include <functional>
#include <string>
#include <vector>

#include "avaca/autograd.hpp"

namespace avaca {

// Builds a scalar graph from leaf variables (one per input array).
using GraphFunction = std::function<Var(const std::vector<Var>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients with central differences
// (f(x+eps) - f(x-eps)) / 2eps on every coordinate of every input.
// Relative error per coordinate uses max(|analytic|, |numeric|, 1e-8) as
// the denominator.
GradCheckResult finite_diff_check(const GraphFunction& f, const std::vector<Array>& point, double eps = 1e-5);

}  // namespace avaca
