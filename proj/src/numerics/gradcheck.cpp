#include "avaca/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "avaca/error.hpp"

namespace avaca {
namespace {

double evaluate(const GraphFunction& f, const std::vector<Array>& point) {
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& a : point) leaves.push_back(Var::constant(a));
  return f(leaves).value().item();
}

}  // namespace

GradCheckResult finite_diff_check(const GraphFunction& f, const std::vector<Array>& point, double eps) {
  if (!(eps > 0.0)) throw ParameterError("finite_diff_check: eps must be positive");

  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& a : point) leaves.push_back(Var::parameter(a));
  Var root = f(leaves);
  backward(root);

  GradCheckResult result;
  std::vector<Array> probe = point;
  for (std::size_t p = 0; p < point.size(); ++p) {
    const Array analytic = leaves[p].grad();
    for (std::size_t i = 0; i < point[p].size(); ++i) {
      const double x0 = point[p][i];
      probe[p][i] = x0 + eps;
      const double up = evaluate(f, probe);
      probe[p][i] = x0 - eps;
      const double down = evaluate(f, probe);
      probe[p][i] = x0;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = p;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace avaca
