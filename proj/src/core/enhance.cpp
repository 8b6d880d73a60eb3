#include "core/enhance.hpp"

#include <random>

#include "core/error.hpp"
#include "core/vloss.hpp"

namespace pvae {
namespace {

Spectrogram analyze(const Waveform& w, const Framing& framing) {
  validate_pipeline_input(w);
  return stft(w, framing.frame_len, framing.hop);
}

LpsFeatures wrap(const Framing& framing, Eigen::MatrixXd values) {
  LpsFeatures l;
  l.framing = framing;
  l.values = std::move(values);
  return l;
}

void check_bins(const PvaeModel& m, const LpsFeatures& l) {
  require(l.bins() == m.config.freq_bins, ErrorCode::kShape,
          "shape error: input bins do not match the model");
}

}  // namespace

EnhanceMode parse_enhance_mode(const std::string& s) {
  if (s == "pvae-l") return EnhanceMode::kPvaeL;
  if (s == "pvae-m") return EnhanceMode::kPvaeM;
  if (s == "y-l") return EnhanceMode::kYL;
  if (s == "y-m") return EnhanceMode::kYM;
  if (s == "passthrough") return EnhanceMode::kPassthrough;
  throw Error(ErrorCode::kInvalidArgument, "unknown enhancement mode: " + s);
}

const char* enhance_mode_name(EnhanceMode m) {
  switch (m) {
    case EnhanceMode::kPvaeL: return "pvae-l";
    case EnhanceMode::kPvaeM: return "pvae-m";
    case EnhanceMode::kYL: return "y-l";
    case EnhanceMode::kYM: return "y-m";
    case EnhanceMode::kPassthrough: return "passthrough";
  }
  return "unknown";
}

LpsEstimates pvae_estimates(const PvaeModel& model, const LpsFeatures& noisy,
                            const EnhanceOptions& opts) {
  check_bins(model, noisy);
  require(opts.samples >= 0, ErrorCode::kInvalidArgument, "samples must be non-negative");
  const auto& norms = model.config.feature_norm;
  const Eigen::MatrixXd y = norms.y.normalize(noisy.values);
  auto [qx, qd] = nsvae_encode(model, y);

  LpsEstimates est;
  if (opts.samples == 0) {
    est.speech = cvae_decode(model, qx.mean).mean;
    est.noise = nvae_decode(model, qd.mean).mean;
  } else {
    std::mt19937_64 rng(opts.seed);
    est.speech = Eigen::MatrixXd::Zero(model.config.freq_bins, y.cols());
    est.noise = est.speech;
    const Eigen::ArrayXXd sx = (0.5 * qx.log_var.array()).exp();
    const Eigen::ArrayXXd sd = (0.5 * qd.log_var.array()).exp();
    for (int k = 0; k < opts.samples; ++k) {
      const Eigen::MatrixXd ex = standard_normal(rng, qx.mean.rows(), qx.mean.cols());
      const Eigen::MatrixXd ed = standard_normal(rng, qd.mean.rows(), qd.mean.cols());
      est.speech += cvae_decode(model, (qx.mean.array() + sx * ex.array()).matrix()).mean;
      est.noise += nvae_decode(model, (qd.mean.array() + sd * ed.array()).matrix()).mean;
    }
    est.speech /= static_cast<double>(opts.samples);
    est.noise /= static_cast<double>(opts.samples);
  }
  est.speech = norms.x.denormalize(est.speech);
  est.noise = norms.d.denormalize(est.noise);
  return est;
}

LpsEstimates baseline_estimates(const BaselineModel& model, const LpsFeatures& noisy) {
  require(noisy.bins() == model.config.freq_bins, ErrorCode::kShape,
          "shape error: input bins do not match the model");
  const auto& norms = model.config.feature_norm;
  auto [x, d] = baseline_predict(model, norms.y.normalize(noisy.values));
  return {norms.x.denormalize(x), norms.d.denormalize(d)};
}

EnhanceResult mask_from_estimates(const Spectrogram& noisy, LpsEstimates est) {
  EnhanceResult r;
  r.mask = compute_mask(wrap(noisy.framing, est.speech), wrap(noisy.framing, est.noise));
  r.audio = istft(apply_mask(noisy, *r.mask));
  r.estimates = std::move(est);
  return r;
}

EnhanceResult enhance_direct(const Waveform& noisy, const PvaeModel& model,
                             const EnhanceOptions& opts) {
  const Spectrogram s = analyze(noisy, opts.framing);
  EnhanceResult r;
  r.estimates = pvae_estimates(model, lps(s), opts);
  r.audio = reconstruct_direct(wrap(s.framing, r.estimates.speech), s);
  return r;
}

EnhanceResult enhance_mask(const Waveform& noisy, const PvaeModel& model,
                           const EnhanceOptions& opts) {
  const Spectrogram s = analyze(noisy, opts.framing);
  return mask_from_estimates(s, pvae_estimates(model, lps(s), opts));
}

EnhanceResult enhance_baseline_direct(const Waveform& noisy, const BaselineModel& model,
                                      const Framing& framing) {
  const Spectrogram s = analyze(noisy, framing);
  EnhanceResult r;
  r.estimates = baseline_estimates(model, lps(s));
  r.audio = reconstruct_direct(wrap(s.framing, r.estimates.speech), s);
  return r;
}

EnhanceResult enhance_baseline_mask(const Waveform& noisy, const BaselineModel& model,
                                    const Framing& framing) {
  const Spectrogram s = analyze(noisy, framing);
  return mask_from_estimates(s, baseline_estimates(model, lps(s)));
}

LpsFeatures nsvae_reconstruct(const Waveform& y, const PvaeModel& model, const Framing& framing) {
  const Spectrogram s = analyze(y, framing);
  const LpsFeatures l = lps(s);
  check_bins(model, l);
  const auto& norms = model.config.feature_norm;
  auto [qx, qd] = nsvae_encode(model, norms.y.normalize(l.values));
  return wrap(s.framing, norms.y.denormalize(nsvae_decode(model, qx.mean, qd.mean).mean));
}

SwapResult latent_swap(const Waveform& a, const Waveform& b, const PvaeModel& model,
                       const Framing& framing) {
  require(a.size() == b.size(), ErrorCode::kInvalidArgument, "inputs must be aligned");
  const Spectrogram sa = analyze(a, framing);
  const Spectrogram sb = analyze(b, framing);
  SwapResult r;
  r.lps_a = lps(sa);
  r.lps_b = lps(sb);
  check_bins(model, r.lps_a);
  const auto& norms = model.config.feature_norm;
  auto qa = nsvae_encode(model, norms.y.normalize(r.lps_a.values));
  auto qb = nsvae_encode(model, norms.y.normalize(r.lps_b.values));
  r.modified = wrap(sa.framing,
                    norms.y.denormalize(nsvae_decode(model, qa.first.mean, qb.second.mean).mean));
  r.audio = reconstruct_direct(r.modified, sa);
  return r;
}

Enhancer::Enhancer(EnhanceMode mode) : mode_(mode) {
  require(mode == EnhanceMode::kPassthrough, ErrorCode::kInvalidArgument,
          std::string("mode ") + enhance_mode_name(mode) + " requires a checkpoint");
}

Enhancer::Enhancer(EnhanceMode mode, const Checkpoint& ckpt, EnhanceOptions opts)
    : mode_(mode), opts_(opts) {
  opts_.framing = ckpt.framing;
  switch (mode) {
    case EnhanceMode::kPvaeL:
    case EnhanceMode::kPvaeM:
      require(ckpt.stage != Stage::kBaseline, ErrorCode::kStage,
              std::string("mode ") + enhance_mode_name(mode) +
                  " needs a jointly trained model, got a baseline checkpoint");
      require(ckpt.stage == Stage::kJoint, ErrorCode::kStage, "model not jointly trained");
      pvae_ = model_from_checkpoint(ckpt);
      break;
    case EnhanceMode::kYL:
    case EnhanceMode::kYM:
      require(ckpt.stage == Stage::kBaseline, ErrorCode::kStage,
              std::string("mode ") + enhance_mode_name(mode) + " needs a baseline checkpoint, got " +
                  stage_name(ckpt.stage));
      baseline_ = baseline_from_checkpoint(ckpt);
      break;
    case EnhanceMode::kPassthrough:
      break;
  }
}

Waveform Enhancer::operator()(const Waveform& noisy) const {
  switch (mode_) {
    case EnhanceMode::kPvaeL: return enhance_direct(noisy, *pvae_, opts_).audio;
    case EnhanceMode::kPvaeM: return enhance_mask(noisy, *pvae_, opts_).audio;
    case EnhanceMode::kYL: return enhance_baseline_direct(noisy, *baseline_, opts_.framing).audio;
    case EnhanceMode::kYM: return enhance_baseline_mask(noisy, *baseline_, opts_.framing).audio;
    case EnhanceMode::kPassthrough: validate_pipeline_input(noisy); return noisy;
  }
  return noisy;
}

}  // namespace pvae
