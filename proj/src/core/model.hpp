#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/autodiff.hpp"
#include "core/params.hpp"

namespace pvae {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kLogVarBiasInit = -2.0;

// Per-bin affine normalization of LPS frames: (v - mean) / std.
struct FeatureNorm {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  bool empty() const { return mean.size() == 0; }
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& frames) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& frames) const;
};

// One normalization per stream: noisy (y), speech (x), noise (d).
struct FeatureNorms {
  FeatureNorm y;
  FeatureNorm x;
  FeatureNorm d;
};

struct ModelConfig {
  int freq_bins = 257;
  int latent_dim_speech = 128;
  int latent_dim_noise = 128;
  std::vector<int> encoder_channels{32, 64, 128, 256};
  int kernel_size = 3;
  int conv_stride = 2;
  bool nsvae_shared_trunk = true;
  FeatureNorms feature_norm;

  void validate() const;
  // Bin counts along the encoder: [freq_bins, after conv 0, ..., after conv n-1].
  std::vector<int> encoder_lengths() const;
};

struct DiagGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_var;

  Eigen::Index size() const { return mean.size(); }
  void validate() const;
};

enum class LatentGroup { kSpeech, kNoise };

struct LatentSample {
  Eigen::VectorXd z;
  LatentGroup group = LatentGroup::kSpeech;
};

// Column-per-frame Gaussian parameters produced by a batched forward pass.
struct GaussianBatch {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd log_var;

  DiagGaussian column(Eigen::Index i) const { return {mean.col(i), log_var.col(i)}; }
};

namespace layers {

struct Dense {
  std::size_t w = 0;
  std::size_t b = 0;
};

struct Conv {
  std::size_t w = 0;
  std::size_t b = 0;
};

struct Trunk {
  std::vector<Conv> convs;
};

struct GaussianHead {
  Dense mean;
  Dense log_var;
};

struct Decoder {
  Dense expand;
  std::vector<Conv> convs;
  Dense mean;
  std::optional<Dense> log_var;  // absent for regression decoders
};

struct GaussianVars {
  ad::Var mean;
  ad::Var log_var;
};

Trunk add_trunk(ParamStore& store, const std::string& prefix, const ModelConfig& cfg);
GaussianHead add_gaussian_head(ParamStore& store, const std::string& prefix, int in, int out);
Dense add_dense(ParamStore& store, const std::string& name, int in, int out);
Decoder add_decoder(ParamStore& store, const std::string& prefix, const ModelConfig& cfg,
                    int latent_dim, bool gaussian);

// Frames [F, B] -> flattened trunk features [L_top * C_top, B].
ad::Var run_trunk(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                  const Trunk& trunk, ad::Var frames);
ad::Var run_dense(ad::Tape& tape, const ParamStore& store, const Dense& layer, ad::Var x);
GaussianVars run_gaussian_head(ad::Tape& tape, const ParamStore& store, const GaussianHead& head,
                               ad::Var features);
// Latents [L, B] -> final hidden features [L_1 * C_0, B] (before the output heads).
ad::Var run_decoder_body(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                         const Decoder& dec, ad::Var z);
GaussianVars run_gaussian_decoder(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                                  const Decoder& dec, ad::Var z);

// Uniform(+-sqrt(1/fan_in)) weights, zero biases, log-variance biases at
// kLogVarBiasInit. Draw order follows store order.
void init_store(ParamStore& store, std::uint64_t seed);

int dense_fan_in(const Eigen::MatrixXd& w);

}  // namespace layers

// Parameter store and layout for the speech (C), noise (N) and noisy-speech
// (NS) autoencoders. Sections: theta_x/phi_x, theta_d/phi_d, theta_y/phi_y.
struct PvaeModel {
  ModelConfig config;
  ParamStore params;

  layers::Trunk cvae_trunk;
  layers::GaussianHead cvae_head;
  layers::Decoder cvae_decoder;

  layers::Trunk nvae_trunk;
  layers::GaussianHead nvae_head;
  layers::Decoder nvae_decoder;

  layers::Trunk nsvae_trunk_x;
  layers::Trunk nsvae_trunk_d;  // same arrays as nsvae_trunk_x when the trunk is shared
  layers::GaussianHead nsvae_head_x;
  layers::GaussianHead nsvae_head_d;
  layers::Decoder nsvae_decoder;
};

inline constexpr const char* kSectionThetaX = "theta_x/";
inline constexpr const char* kSectionPhiX = "phi_x/";
inline constexpr const char* kSectionThetaD = "theta_d/";
inline constexpr const char* kSectionPhiD = "phi_d/";
inline constexpr const char* kSectionThetaY = "theta_y/";
inline constexpr const char* kSectionPhiY = "phi_y/";

// Layout with all-zero parameters.
PvaeModel build_model(const ModelConfig& cfg);
PvaeModel init_params(const ModelConfig& cfg, std::uint64_t seed);

// Verifies every array's shape against the one implied by the config.
void audit_shapes(const PvaeModel& model);

int decoder_input_width(const ModelConfig& cfg);  // width of the NS decoder input

namespace net {

using layers::GaussianVars;

// All frame arguments are normalized LPS [F, B]; latents are [L, B].
GaussianVars cvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var x);
GaussianVars cvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zx);
GaussianVars nvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var d);
GaussianVars nvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zd);
std::pair<GaussianVars, GaussianVars> nsvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var y);
GaussianVars nsvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zx, ad::Var zd);

// z = mean + exp(log_var / 2) * eps
ad::Var reparameterize(ad::Tape& tape, const GaussianVars& g, const Eigen::MatrixXd& eps);

}  // namespace net

// Value-level forward passes. Frames are columns of normalized LPS.
GaussianBatch cvae_encode(const PvaeModel& m, const Eigen::MatrixXd& x_frames);
GaussianBatch cvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zx);
GaussianBatch nvae_encode(const PvaeModel& m, const Eigen::MatrixXd& d_frames);
GaussianBatch nvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zd);
std::pair<GaussianBatch, GaussianBatch> nsvae_encode(const PvaeModel& m,
                                                     const Eigen::MatrixXd& y_frames);
GaussianBatch nsvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zx,
                           const Eigen::MatrixXd& zd);

// Single-frame forms.
DiagGaussian cvae_encode(const PvaeModel& m, const Eigen::VectorXd& x_frame);
DiagGaussian cvae_decode(const PvaeModel& m, const LatentSample& zx);
DiagGaussian nvae_encode(const PvaeModel& m, const Eigen::VectorXd& d_frame);
DiagGaussian nvae_decode(const PvaeModel& m, const LatentSample& zd);
std::pair<DiagGaussian, DiagGaussian> nsvae_encode(const PvaeModel& m,
                                                   const Eigen::VectorXd& y_frame);
DiagGaussian nsvae_decode(const PvaeModel& m, const LatentSample& zx, const LatentSample& zd);

LatentSample reparameterize(const DiagGaussian& g, const Eigen::VectorXd& eps, LatentGroup group);

}  // namespace pvae
