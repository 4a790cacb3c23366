#include <algorithm>
#include <numeric>
#include <string>

#include "avaca/error.hpp"
#include "avaca/objectives.hpp"
#include "avaca/ops.hpp"

namespace avaca {
namespace {

void check_scores(const Var& scores, const char* what) {
  if (scores.value().empty()) throw ContractError(std::string(what) + ": empty score vector");
  for (double s : scores.value().data()) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ContractError(std::string(what) + ": score " + std::to_string(s) + " outside [0, 1]");
    }
  }
}

void check_label(int label) {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1, got " + std::to_string(label));
}

Var flat(const Var& scores) {
  return scores.value().rank() == 1 ? scores : ops::reshape(scores, {scores.value().size()});
}

}  // namespace

void LossConfig::validate() const {
  if (alpha < 1) throw ParameterError("alpha must be >= 1");
  if (!(theta >= 0.0)) throw ParameterError("theta must be >= 0");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"alpha", c.alpha}, {"theta", c.theta}, {"lambda", c.lambda}, {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  LossConfig d;
  c.alpha = j.value("alpha", d.alpha);
  c.theta = j.value("theta", d.theta);
  c.lambda = j.value("lambda", d.lambda);
  c.epsilon = j.value("epsilon", d.epsilon);
}

std::size_t kmax_count(std::size_t clips, std::size_t alpha) {
  if (alpha < 1) throw ParameterError("alpha must be >= 1");
  return std::max<std::size_t>(1, clips / alpha);
}

std::vector<std::size_t> kmax_indices(std::span<const double> scores, std::size_t alpha) {
  if (scores.empty()) throw ContractError("kmax_select: empty score vector");
  const std::size_t k = kmax_count(scores.size(), alpha);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  order.resize(k);
  return order;
}

std::vector<double> kmax_select(std::span<const double> scores, std::size_t alpha) {
  std::vector<double> out;
  for (std::size_t i : kmax_indices(scores, alpha)) out.push_back(scores[i]);
  return out;
}

Var dmil_loss(const Var& scores, int label, std::size_t alpha, double epsilon) {
  check_scores(scores, "dmil_loss");
  check_label(label);
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
  const Var s = flat(scores);
  const std::vector<std::size_t> top = kmax_indices(s.value().data(), alpha);
  const Var selected = ops::gather(s, top);
  // Binary cross-entropy: -log(s) for anomalous videos, -log(1 - s) for normal ones.
  const Var target = label == 1 ? selected : ops::affine(selected, -1.0, 1.0);
  return ops::affine(ops::mean(ops::log_clamped(target, epsilon, 1.0 - epsilon)), -1.0, 0.0);
}

Var center_loss(const Var& scores, int label) {
  check_scores(scores, "center_loss");
  check_label(label);
  const Var s = flat(scores);
  if (label == 1) return Var::constant(Array::scalar(0.0));
  const Var center = ops::broadcast_scalar(ops::mean(s), s.shape());
  return ops::mean(ops::square(ops::sub(s, center)));
}

TotalLoss total_loss(const Var& scores, int label, const LossConfig& config) {
  config.validate();
  const Var dmil = dmil_loss(scores, label, config.alpha, config.epsilon);
  const Var center = center_loss(scores, label);
  TotalLoss out;
  out.total = ops::add(ops::affine(dmil, config.theta, 0.0), ops::affine(center, config.lambda, 0.0));
  out.breakdown.dmil = dmil.value().item();
  out.breakdown.center = center.value().item();
  out.breakdown.total = config.theta * out.breakdown.dmil + config.lambda * out.breakdown.center;
  out.breakdown.k_used = kmax_count(scores.value().size(), config.alpha);
  return out;
}

double dmil_loss(std::span<const double> scores, int label, std::size_t alpha, double epsilon) {
  if (scores.empty()) throw ContractError("dmil_loss: empty score vector");
  const Var s = Var::constant(Array::vector({scores.begin(), scores.end()}));
  return dmil_loss(s, label, alpha, epsilon).value().item();
}

double center_loss(std::span<const double> scores, int label) {
  if (scores.empty()) throw ContractError("center_loss: empty score vector");
  const Var s = Var::constant(Array::vector({scores.begin(), scores.end()}));
  return center_loss(s, label).value().item();
}

LossBreakdown total_loss(std::span<const double> scores, int label, const LossConfig& config) {
  if (scores.empty()) throw ContractError("total_loss: empty score vector");
  const Var s = Var::constant(Array::vector({scores.begin(), scores.end()}));
  return total_loss(s, label, config).breakdown;
}

}  // namespace avaca
