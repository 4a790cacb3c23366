#include <cmath>

#include "avaca/error.hpp"
#include "avaca/model.hpp"
#include "avaca/rng.hpp"

namespace avaca {
namespace {

constexpr std::size_t kKernel = 3;

bool is_bias(const std::string& name) { return name.size() >= 5 && name.ends_with(".bias"); }

// Inputs feeding one output unit: taps × input width for convolution
// kernels, the input width for dense weights.
std::size_t fan_in(const Shape& shape) {
  if (shape.size() == 3) return shape[0] * shape[1];
  return shape[0];
}

void add_conv1d(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, std::size_t d_in,
                std::size_t d_out) {
  out.emplace_back(prefix + ".kernel", Shape{kKernel, d_in, d_out});
  out.emplace_back(prefix + ".bias", Shape{d_out});
}

void add_dense(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, std::size_t d_in,
               std::size_t d_out) {
  out.emplace_back(prefix + ".weight", Shape{d_in, d_out});
  out.emplace_back(prefix + ".bias", Shape{d_out});
}

}  // namespace

const Array& ModelParameters::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, a] : arrays) n += a.size();
  return n;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const AvacaConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  std::vector<std::pair<std::string, Shape>> out;

  out.emplace_back("stage1.visual.conv0.kernel", Shape{kKernel, kKernel, config.visual_channels});
  out.emplace_back("stage1.visual.conv0.bias", Shape{config.visual_channels});
  out.emplace_back("stage1.visual.mix0.weight", Shape{config.visual_channels});
  out.emplace_back("stage1.visual.mix0.bias", Shape{1});
  add_dense(out, "stage1.visual.proj1", config.d_visual, d);
  add_conv1d(out, "stage1.audio.conv0", config.d_audio, d);
  add_conv1d(out, "stage1.audio.conv1", d, d);

  for (const char* block : {"vat", "avt"}) {
    const std::string prefix = std::string(block) + ".";
    add_dense(out, prefix + "query", d, d);
    // No key bias: it shifts every logit in a row by the same amount.
    out.emplace_back(prefix + "key.weight", Shape{d, d});
    add_dense(out, prefix + "value", d, d);
    add_dense(out, prefix + "out", d, d);
  }
  for (const char* branch : {"vat", "avt"}) {
    add_conv1d(out, std::string("stage2.") + branch + ".conv0", d, d);
    add_conv1d(out, std::string("stage2.") + branch + ".conv1", d, d);
  }
  add_dense(out, "head", 2 * d, 1);
  return out;
}

ModelParameters init_parameters(const AvacaConfig& config) {
  ModelParameters params;
  Rng rng(config.seed);
  for (const auto& [name, shape] : parameter_layout(config)) {
    Array a(shape);
    if (!is_bias(name)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(shape)));
      for (double& v : a.mutable_data()) v = rng.uniform(-bound, bound);
    }
    params.arrays.emplace(name, std::move(a));
  }
  return params;
}

ParameterVars make_parameter_vars(const ModelParameters& params, bool trainable) {
  ParameterVars vars;
  for (const auto& [name, a] : params.arrays) {
    vars.emplace(name, trainable ? Var::parameter(a) : Var::constant(a));
  }
  return vars;
}

}  // namespace avaca
