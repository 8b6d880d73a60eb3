#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/params.hpp"

namespace pvae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  // Round parameters and moments to float32 after each step so checkpoints
  // (float32 payloads) reproduce the in-memory state exactly.
  bool round_to_float = false;
};

struct AdamSlot {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  std::int64_t step = 0;
};

// One slot per parameter array, with its own step counter so arrays that join
// training late (the NS-VAE after pretraining) get a fresh bias correction.
struct AdamState {
  std::vector<AdamSlot> slots;
};

AdamState make_adam_state(const ParamStore& params);

// Clips the gradients of `trainable` to a global L2 norm of grad_clip_norm,
// then applies one bias-corrected Adam update to each of them. Returns the
// pre-clip norm.
double adam_step(ParamStore& params, const GradStore& grads, AdamState& state,
                 const AdamConfig& cfg, std::span<const std::size_t> trainable);

// All indices of the store.
std::vector<std::size_t> all_indices(const ParamStore& params);

}  // namespace pvae
