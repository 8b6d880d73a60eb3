#include "core/vloss.hpp"

#include <cmath>

#include "core/error.hpp"

namespace pvae {
namespace {

void check_dims(Eigen::Index a, Eigen::Index b) {
  require(a == b, ErrorCode::kShape, "shape error");
}

}  // namespace

bool LossBreakdown::finite() const {
  for (double v : {kl_speech, kl_noise, ratio_speech, ratio_noise, nll_y, loss_c, loss_n, total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double kl_diag_standard(const DiagGaussian& q) {
  check_dims(q.mean.size(), q.log_var.size());
  return 0.5 * (q.mean.array().square() + q.log_var.array().exp() - 1.0 - q.log_var.array()).sum();
}

double kl_diag_diag(const DiagGaussian& a, const DiagGaussian& b) {
  check_dims(a.mean.size(), a.log_var.size());
  check_dims(b.mean.size(), b.log_var.size());
  check_dims(a.size(), b.size());
  const auto diff = a.mean.array() - b.mean.array();
  return 0.5 * (b.log_var.array() - a.log_var.array() +
                (a.log_var.array().exp() + diff.square()) / b.log_var.array().exp() - 1.0)
                   .sum();
}

double gaussian_log_density(const Eigen::VectorXd& v, const DiagGaussian& g) {
  check_dims(v.size(), g.size());
  check_dims(g.mean.size(), g.log_var.size());
  const auto diff = v.array() - g.mean.array();
  return (-kHalfLog2Pi - 0.5 * g.log_var.array() - 0.5 * diff.square() / g.log_var.array().exp())
      .sum();
}

double standard_log_density(const Eigen::VectorXd& v) {
  return (-kHalfLog2Pi - 0.5 * v.array().square()).sum();
}

double ratio_term(const LatentSample& z, const DiagGaussian& posterior_from_clean) {
  return gaussian_log_density(z.z, posterior_from_clean) - standard_log_density(z.z);
}

Eigen::MatrixXd standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

EpsDraws draw_eps(std::mt19937_64& rng, const ModelConfig& cfg, int batch) {
  EpsDraws e;
  e.speech = standard_normal(rng, cfg.latent_dim_speech, batch);
  e.noise = standard_normal(rng, cfg.latent_dim_noise, batch);
  e.clean_speech = standard_normal(rng, cfg.latent_dim_speech, batch);
  e.clean_noise = standard_normal(rng, cfg.latent_dim_noise, batch);
  return e;
}

const char* ratio_gradient_name(RatioGradient r) {
  return r == RatioGradient::kFull ? "full" : "value_only";
}

RatioGradient parse_ratio_gradient(const std::string& s) {
  if (s == "full") return RatioGradient::kFull;
  if (s == "value_only") return RatioGradient::kValueOnly;
  throw Error(ErrorCode::kInvalidArgument, "unknown ratio_gradient: " + s);
}

namespace losses {

ad::Var kl_standard(ad::Tape& tape, const GaussianVars& q) {
  // 0.5 * sum(mu^2 + exp(lv) - 1 - lv)
  ad::Var inner = tape.sub(tape.add(tape.square(q.mean), tape.exp(q.log_var)), q.log_var);
  ad::Var s = tape.sum(inner);
  const double count = static_cast<double>(q.mean.value().size());
  return tape.scale(tape.add_scalar(s, -count), 0.5);
}

ad::Var kl_diag(ad::Tape& tape, const GaussianVars& a, const GaussianVars& b) {
  // 0.5 * sum(lv_b - lv_a + (exp(lv_a) + (mu_a - mu_b)^2) * exp(-lv_b) - 1)
  require(a.mean.rows() == b.mean.rows() && a.mean.cols() == b.mean.cols(), ErrorCode::kShape,
          "shape error");
  ad::Var spread = tape.add(tape.exp(a.log_var), tape.square(tape.sub(a.mean, b.mean)));
  ad::Var scaled = tape.mul(spread, tape.exp(tape.scale(b.log_var, -1.0)));
  ad::Var inner = tape.add(tape.sub(b.log_var, a.log_var), scaled);
  const double count = static_cast<double>(a.mean.value().size());
  return tape.scale(tape.add_scalar(tape.sum(inner), -count), 0.5);
}

ad::Var log_density(ad::Tape& tape, ad::Var v, const GaussianVars& g) {
  // sum(-0.5 log 2pi - 0.5 lv - 0.5 (v - mu)^2 exp(-lv))
  require(v.rows() == g.mean.rows() && v.cols() == g.mean.cols(), ErrorCode::kShape, "shape error");
  ad::Var quad = tape.mul(tape.square(tape.sub(v, g.mean)), tape.exp(tape.scale(g.log_var, -1.0)));
  ad::Var s = tape.sum(tape.add(g.log_var, quad));
  const double count = static_cast<double>(v.value().size());
  return tape.add_scalar(tape.scale(s, -0.5), -kHalfLog2Pi * count);
}

ad::Var standard_log_density(ad::Tape& tape, ad::Var v) {
  const double count = static_cast<double>(v.value().size());
  return tape.add_scalar(tape.scale(tape.sum(tape.square(v)), -0.5), -kHalfLog2Pi * count);
}

VaeTerms vae_loss_from_posterior(ad::Tape& tape, ad::Var frames, const GaussianVars& posterior,
                                 const DecodeFn& decode, const Eigen::MatrixXd& eps) {
  const double inv_batch = 1.0 / static_cast<double>(frames.cols());
  ad::Var z = net::reparameterize(tape, posterior, eps);
  GaussianVars recon = decode(z);
  VaeTerms t;
  t.kl = tape.scale(kl_standard(tape, posterior), inv_batch);
  t.nll = tape.scale(log_density(tape, frames, recon), -inv_batch);
  t.total = tape.add(t.kl, t.nll);
  return t;
}

VaeTerms vae_loss(ad::Tape& tape, ad::Var frames, const EncodeFn& encode, const DecodeFn& decode,
                  const Eigen::MatrixXd& eps) {
  return vae_loss_from_posterior(tape, frames, encode(frames), decode, eps);
}

PermutationTerms permutation_loss(ad::Tape& tape, const PvaeModel& model, ad::Var y,
                                  const GaussianVars& speech_posterior,
                                  const GaussianVars& noise_posterior, const Eigen::MatrixXd& eps_x,
                                  const Eigen::MatrixXd& eps_d, RatioGradient ratio_grad) {
  const double inv_batch = 1.0 / static_cast<double>(y.cols());
  auto [ns_x, ns_d] = net::nsvae_encode(tape, model, y);
  ad::Var zx = net::reparameterize(tape, ns_x, eps_x);
  ad::Var zd = net::reparameterize(tape, ns_d, eps_d);

  PermutationTerms t;
  t.kl_speech = tape.scale(kl_diag(tape, ns_x, speech_posterior), inv_batch);
  t.kl_noise = tape.scale(kl_diag(tape, ns_d, noise_posterior), inv_batch);
  auto ratio = [&](ad::Var z, GaussianVars g) {
    if (ratio_grad == RatioGradient::kValueOnly) {
      z = tape.constant(z.value());
      g = {tape.constant(g.mean.value()), tape.constant(g.log_var.value())};
    }
    return tape.scale(tape.sub(log_density(tape, z, g), standard_log_density(tape, z)), inv_batch);
  };
  t.ratio_speech = ratio(zx, speech_posterior);
  t.ratio_noise = ratio(zd, noise_posterior);
  GaussianVars recon = net::nsvae_decode(tape, model, zx, zd);
  t.nll_y = tape.scale(log_density(tape, y, recon), -inv_batch);
  t.total = tape.add(tape.add(tape.add(tape.add(t.kl_speech, t.kl_noise), t.ratio_speech),
                              t.ratio_noise),
                     t.nll_y);
  return t;
}

TotalTerms total_loss(ad::Tape& tape, const PvaeModel& model, const TripletBatch& batch,
                      const EpsDraws& eps, RatioGradient ratio_grad) {
  ad::Var y = tape.constant(batch.y);
  ad::Var x = tape.constant(batch.x);
  ad::Var d = tape.constant(batch.d);
  GaussianVars px = net::cvae_encode(tape, model, x);
  GaussianVars pd = net::nvae_encode(tape, model, d);

  TotalTerms t;
  t.permutation = permutation_loss(tape, model, y, px, pd, eps.speech, eps.noise,
                                    ratio_grad);
  t.clean = vae_loss_from_posterior(
      tape, x, px, [&](ad::Var z) { return net::cvae_decode(tape, model, z); }, eps.clean_speech);
  t.noise = vae_loss_from_posterior(
      tape, d, pd, [&](ad::Var z) { return net::nvae_decode(tape, model, z); }, eps.clean_noise);
  t.total = tape.add(tape.add(t.permutation.total, t.clean.total), t.noise.total);
  return t;
}

PretrainTerms pretrain_loss(ad::Tape& tape, const PvaeModel& model, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& d, const EpsDraws& eps) {
  ad::Var xv = tape.constant(x);
  ad::Var dv = tape.constant(d);
  PretrainTerms t;
  t.clean = vae_loss(
      tape, xv, [&](ad::Var f) { return net::cvae_encode(tape, model, f); },
      [&](ad::Var z) { return net::cvae_decode(tape, model, z); }, eps.clean_speech);
  t.noise = vae_loss(
      tape, dv, [&](ad::Var f) { return net::nvae_encode(tape, model, f); },
      [&](ad::Var z) { return net::nvae_decode(tape, model, z); }, eps.clean_noise);
  t.total = tape.add(t.clean.total, t.noise.total);
  return t;
}

}  // namespace losses

LossBreakdown breakdown(const losses::TotalTerms& t) {
  LossBreakdown b;
  b.kl_speech = t.permutation.kl_speech.scalar();
  b.kl_noise = t.permutation.kl_noise.scalar();
  b.ratio_speech = t.permutation.ratio_speech.scalar();
  b.ratio_noise = t.permutation.ratio_noise.scalar();
  b.nll_y = t.permutation.nll_y.scalar();
  b.loss_c = t.clean.total.scalar();
  b.loss_n = t.noise.total.scalar();
  b.total = t.total.scalar();
  return b;
}

LossBreakdown permutation_loss(const Eigen::VectorXd& y_frame, const Eigen::VectorXd& x_frame,
                               const Eigen::VectorXd& d_frame, const PvaeModel& model,
                               const Eigen::VectorXd& eps_x, const Eigen::VectorXd& eps_d) {
  ad::Tape tape(false);
  ad::Var y = tape.constant(y_frame);
  auto px = net::cvae_encode(tape, model, tape.constant(x_frame));
  auto pd = net::nvae_encode(tape, model, tape.constant(d_frame));
  auto t = losses::permutation_loss(tape, model, y, px, pd, eps_x, eps_d);
  LossBreakdown b;
  b.kl_speech = t.kl_speech.scalar();
  b.kl_noise = t.kl_noise.scalar();
  b.ratio_speech = t.ratio_speech.scalar();
  b.ratio_noise = t.ratio_noise.scalar();
  b.nll_y = t.nll_y.scalar();
  b.total = t.total.scalar();
  return b;
}

LossBreakdown total_loss(const TripletBatch& batch, const PvaeModel& model, const EpsDraws& eps) {
  ad::Tape tape(false);
  return breakdown(losses::total_loss(tape, model, batch, eps));
}

}  // namespace pvae
