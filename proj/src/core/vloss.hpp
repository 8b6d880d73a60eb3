#pragma once

// Closed-form Gaussian kernels and the training objectives built from them.
// Priors over both latent groups are fixed at N(0, I). Batched losses sum
// over latent / frequency dimensions and average over the batch.

#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "core/autodiff.hpp"
#include "core/model.hpp"

namespace pvae {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct LossBreakdown {
  double kl_speech = 0.0;
  double kl_noise = 0.0;
  double ratio_speech = 0.0;
  double ratio_noise = 0.0;
  double nll_y = 0.0;
  double loss_c = 0.0;
  double loss_n = 0.0;
  double total = 0.0;

  double permutation() const { return kl_speech + kl_noise + ratio_speech + ratio_noise + nll_y; }
  bool finite() const;
};

// KL(q || N(0, I))
double kl_diag_standard(const DiagGaussian& q);
// KL(a || b)
double kl_diag_diag(const DiagGaussian& a, const DiagGaussian& b);
double gaussian_log_density(const Eigen::VectorXd& v, const DiagGaussian& g);
double standard_log_density(const Eigen::VectorXd& v);
// log p(z | clean) - log N(z; 0, I)
double ratio_term(const LatentSample& z, const DiagGaussian& posterior_from_clean);

namespace losses {

using layers::GaussianVars;

// Batch sums (not means) of the kernels above, one column per frame.
ad::Var kl_standard(ad::Tape& tape, const GaussianVars& q);
ad::Var kl_diag(ad::Tape& tape, const GaussianVars& a, const GaussianVars& b);
ad::Var log_density(ad::Tape& tape, ad::Var v, const GaussianVars& g);
ad::Var standard_log_density(ad::Tape& tape, ad::Var v);

struct VaeTerms {
  ad::Var kl;     // batch mean
  ad::Var nll;    // batch mean
  ad::Var total;  // kl + nll
};

using EncodeFn = std::function<GaussianVars(ad::Var)>;
using DecodeFn = std::function<GaussianVars(ad::Var)>;

// Negative ELBO of a single-latent VAE with one reparameterized sample per
// frame. `posterior` may be supplied to reuse an encoder pass already on the tape.
VaeTerms vae_loss(ad::Tape& tape, ad::Var frames, const EncodeFn& encode, const DecodeFn& decode,
                  const Eigen::MatrixXd& eps);
VaeTerms vae_loss_from_posterior(ad::Tape& tape, ad::Var frames, const GaussianVars& posterior,
                                 const DecodeFn& decode, const Eigen::MatrixXd& eps);

struct PermutationTerms {
  ad::Var kl_speech;
  ad::Var kl_noise;
  ad::Var ratio_speech;
  ad::Var ratio_noise;
  ad::Var nll_y;
  ad::Var total;
};

struct TotalTerms {
  PermutationTerms permutation;
  VaeTerms clean;
  VaeTerms noise;
  ad::Var total;
};

}  // namespace losses

// Normalized frames of aligned (noisy, speech, noise) triplets, [F, B] each.
struct TripletBatch {
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd d;

  int size() const { return static_cast<int>(y.cols()); }
};

// Standard-normal draws for one step. `speech`/`noise` feed the NS posterior
// samples (shared by the ratio terms and the noisy likelihood); `clean_speech`
// and `clean_noise` feed the C-VAE / N-VAE reconstruction terms.
struct EpsDraws {
  Eigen::MatrixXd speech;
  Eigen::MatrixXd noise;
  Eigen::MatrixXd clean_speech;
  Eigen::MatrixXd clean_noise;
};

Eigen::MatrixXd standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);
EpsDraws draw_eps(std::mt19937_64& rng, const ModelConfig& cfg, int batch);

// kFull differentiates every term. kValueOnly keeps the ratio terms in the
// loss value but routes no gradient through them.
enum class RatioGradient { kFull, kValueOnly };

const char* ratio_gradient_name(RatioGradient r);
RatioGradient parse_ratio_gradient(const std::string& s);

namespace losses {

PermutationTerms permutation_loss(ad::Tape& tape, const PvaeModel& model, ad::Var y,
                                  const GaussianVars& speech_posterior,
                                  const GaussianVars& noise_posterior, const Eigen::MatrixXd& eps_x,
                                  const Eigen::MatrixXd& eps_d,
                                  RatioGradient ratio_grad = RatioGradient::kFull);

TotalTerms total_loss(ad::Tape& tape, const PvaeModel& model, const TripletBatch& batch,
                      const EpsDraws& eps, RatioGradient ratio_grad = RatioGradient::kFull);

// C-VAE and N-VAE negative ELBOs only (the pretraining objective).
struct PretrainTerms {
  VaeTerms clean;
  VaeTerms noise;
  ad::Var total;
};
PretrainTerms pretrain_loss(ad::Tape& tape, const PvaeModel& model, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& d, const EpsDraws& eps);

}  // namespace losses

LossBreakdown breakdown(const losses::TotalTerms& t);

// Value-level forms.
LossBreakdown permutation_loss(const Eigen::VectorXd& y_frame, const Eigen::VectorXd& x_frame,
                               const Eigen::VectorXd& d_frame, const PvaeModel& model,
                               const Eigen::VectorXd& eps_x, const Eigen::VectorXd& eps_d);
LossBreakdown total_loss(const TripletBatch& batch, const PvaeModel& model, const EpsDraws& eps);

}  // namespace pvae
