#include "core/adam.hpp"

#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace pvae {

AdamState make_adam_state(const ParamStore& params) {
  AdamState s;
  for (const auto& a : params) {
    s.slots.push_back({Eigen::MatrixXd::Zero(a.value.rows(), a.value.cols()),
                       Eigen::MatrixXd::Zero(a.value.rows(), a.value.cols()), 0});
  }
  return s;
}

std::vector<std::size_t> all_indices(const ParamStore& params) {
  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double adam_step(ParamStore& params, const GradStore& grads, AdamState& state,
                 const AdamConfig& cfg, std::span<const std::size_t> trainable) {
  require(grads.size() == params.size() && state.slots.size() == params.size(), ErrorCode::kShape,
          "shape error: optimizer state does not match parameters");
  double sq = 0.0;
  for (std::size_t i : trainable) {
    const auto& g = grads[i];
    require(g.rows() == params[i].value.rows() && g.cols() == params[i].value.cols(),
            ErrorCode::kShape, "shape error: gradient " + params[i].name);
    require(g.allFinite(), ErrorCode::kNumerical, "numerical failure: gradient of " + params[i].name);
    sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm)
                          ? cfg.grad_clip_norm / norm
                          : 1.0;

  for (std::size_t i : trainable) {
    AdamSlot& slot = state.slots[i];
    auto& w = params[i].value;
    ++slot.step;
    const double t = static_cast<double>(slot.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const auto g = (grads[i].array() * clip).eval();
    slot.m.array() = cfg.beta1 * slot.m.array() + (1.0 - cfg.beta1) * g;
    slot.v.array() = cfg.beta2 * slot.v.array() + (1.0 - cfg.beta2) * g.square();
    w.array() -= cfg.learning_rate * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + cfg.eps);
    if (cfg.round_to_float) {
      round_to_float(w);
      round_to_float(slot.m);
      round_to_float(slot.v);
    }
    require(w.allFinite(), ErrorCode::kNumerical, "numerical failure: parameter " + params[i].name);
  }
  return norm;
}

}  // namespace pvae
