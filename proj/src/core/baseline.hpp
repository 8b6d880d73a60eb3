#pragma once

// Y-CNN regression baseline: the encoder trunk of the autoencoders, a single
// linear latent layer, and two mean-only decoders that regress the
// normalized speech and noise LPS of a noisy frame.

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "core/autodiff.hpp"
#include "core/model.hpp"
#include "core/vloss.hpp"

namespace pvae {

inline constexpr const char* kSectionBaseline = "ycnn/";

struct BaselineModel {
  ModelConfig config;
  ParamStore params;
  layers::Trunk trunk;
  layers::Dense latent;
  layers::Decoder decoder_x;
  layers::Decoder decoder_d;
};

BaselineModel build_baseline(const ModelConfig& cfg);
BaselineModel init_baseline(const ModelConfig& cfg, std::uint64_t seed);

namespace net {

struct BaselineOutputs {
  ad::Var speech;  // normalized x estimate [F, B]
  ad::Var noise;   // normalized d estimate [F, B]
};

BaselineOutputs baseline_forward(ad::Tape& tape, const BaselineModel& m, ad::Var y);

}  // namespace net

namespace losses {

struct BaselineTerms {
  ad::Var speech;  // batch mean of the per-frame summed squared error
  ad::Var noise;
  ad::Var total;
};

BaselineTerms baseline_loss(ad::Tape& tape, const BaselineModel& m, const TripletBatch& batch);

}  // namespace losses

// Normalized (speech, noise) LPS estimates for normalized noisy frames.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> baseline_predict(const BaselineModel& m,
                                                             const Eigen::MatrixXd& y_frames);

}  // namespace pvae
