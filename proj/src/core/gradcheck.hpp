#pragma once

#include <cstdint>
#include <string>

#include "core/model.hpp"

namespace pvae {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  int attempts = 0;  // test points drawn until one was kink-free
};

// The L = 4, F = 17 configuration used for derivative checks.
ModelConfig gradcheck_config();

// Compares every parameter gradient of the total loss against central
// differences with step kGradCheckStep. Relative error uses
// max(|a|, |b|, floor) as the denominator. A central difference is only
// meaningful when x - h and x + h sit on the same side of every ReLU / clamp
// kink, so test points (model, batch, eps) are redrawn until that holds for
// every coordinate.
inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckFloor = 1e-5;
GradCheckReport gradcheck_total_loss(std::uint64_t seed, int batch = 3, int max_attempts = 64);

}  // namespace pvae
