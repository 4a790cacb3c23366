#pragma once

#include <cstdint>
#include <vector>

#include "avaca/gradcheck.hpp"
#include "avaca/model.hpp"
#include "avaca/objectives.hpp"

namespace avaca {

struct ModelCheckCase {
  AvacaConfig model;
  LossConfig loss;
  std::size_t clips = 5;
  int label = 1;
};

struct ModelCheckResult {
  ModelCheckCase check;
  GradCheckResult gradient;
  std::string worst_parameter;
};

// Finite-difference check of forward + total loss with respect to every
// model parameter, on random features and jittered parameters drawn from `seed`.
ModelCheckResult check_model_gradients(const ModelCheckCase& check, std::uint64_t seed, double eps = 1e-5);

// Small configurations covering heads {1, 4}, every audio mode and both labels.
std::vector<ModelCheckCase> toy_check_cases();

}  // namespace avaca
