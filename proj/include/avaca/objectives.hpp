#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "avaca/autograd.hpp"

namespace avaca {

struct LossConfig {
  std::size_t alpha = 16;  // k = max(1, floor(t / alpha))
  double theta = 10.0;     // DMIL weight
  double lambda = 1.0;     // center-loss weight
  double epsilon = 1e-7;   // log arguments clamped to [epsilon, 1 - epsilon]

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

struct LossBreakdown {
  double dmil = 0.0;
  double center = 0.0;
  double total = 0.0;
  std::size_t k_used = 0;
};

std::size_t kmax_count(std::size_t clips, std::size_t alpha);

// Positions of the k largest scores, ordered by descending score with ties
// going to the earlier clip.
std::vector<std::size_t> kmax_indices(std::span<const double> scores, std::size_t alpha);
std::vector<double> kmax_select(std::span<const double> scores, std::size_t alpha);

// Graph versions, differentiable with respect to the score vector.
Var dmil_loss(const Var& scores, int label, std::size_t alpha, double epsilon);
Var center_loss(const Var& scores, int label);

struct TotalLoss {
  Var total;
  LossBreakdown breakdown;
};
TotalLoss total_loss(const Var& scores, int label, const LossConfig& config);

// Plain-value conveniences over the graph versions.
double dmil_loss(std::span<const double> scores, int label, std::size_t alpha, double epsilon);
double center_loss(std::span<const double> scores, int label);
LossBreakdown total_loss(std::span<const double> scores, int label, const LossConfig& config);

}  // namespace avaca
