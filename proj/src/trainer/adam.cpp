#include <cmath>

#include "avaca/error.hpp"
#include "avaca/trainer.hpp"

namespace avaca {

void adam_step(ModelParameters& params, const GradientMap& grads, AdamState& state, const AdamOptions& options) {
  if (!(options.learning_rate >= 0.0)) throw ParameterError("adam: learning rate must be >= 0");
  for (const auto& [name, g] : grads) {
    auto it = params.arrays.find(name);
    if (it == params.arrays.end()) throw ContractError("adam: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw ContractError("adam: gradient shape " + shape_string(g.shape()) + " does not match parameter '" + name +
                          "' of shape " + shape_string(it->second.shape()));
    }
  }

  ++state.step;
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));

  for (auto& [name, p] : params.arrays) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m = Array::zeros(p.shape());
    if (v.empty()) v = Array::zeros(p.shape());
    auto git = grads.find(name);
    const Array* g = git == grads.end() ? nullptr : &git->second;
    auto pd = p.mutable_data();
    auto md = m.mutable_data();
    auto vd = v.mutable_data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      md[i] = options.beta1 * md[i] + (1.0 - options.beta1) * gi;
      vd[i] = options.beta2 * vd[i] + (1.0 - options.beta2) * gi * gi;
      const double m_hat = md[i] / correction1;
      const double v_hat = vd[i] / correction2;
      pd[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

bool clip_global_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return false;
  const double factor = max_norm / norm;
  for (auto& [name, g] : grads) {
    for (double& v : g.mutable_data()) v *= factor;
  }
  return true;
}

}  // namespace avaca
