#include "core/model.hpp"

#include <cmath>
#include <random>

#include "core/error.hpp"

namespace pvae {

Eigen::MatrixXd FeatureNorm::normalize(const Eigen::MatrixXd& frames) const {
  if (empty()) return frames;
  require(frames.rows() == mean.size(), ErrorCode::kShape, "shape error: normalization");
  return ((frames.colwise() - mean).array().colwise() / std.array()).matrix();
}

Eigen::MatrixXd FeatureNorm::denormalize(const Eigen::MatrixXd& frames) const {
  if (empty()) return frames;
  require(frames.rows() == mean.size(), ErrorCode::kShape, "shape error: normalization");
  return (frames.array().colwise() * std.array()).matrix().colwise() + mean;
}

void ModelConfig::validate() const {
  require(freq_bins > 0 && latent_dim_speech >= 1 && latent_dim_noise >= 1,
          ErrorCode::kInvalidArgument, "model config: counts must be positive");
  require(!encoder_channels.empty(), ErrorCode::kInvalidArgument,
          "model config: encoder_channels must be non-empty");
  for (int c : encoder_channels) {
    require(c > 0, ErrorCode::kInvalidArgument, "model config: channel counts must be positive");
  }
  require(kernel_size > 0 && kernel_size % 2 == 1, ErrorCode::kInvalidArgument,
          "model config: kernel_size must be odd");
  require(conv_stride > 0, ErrorCode::kInvalidArgument, "model config: conv_stride must be positive");
  for (const FeatureNorm* n : {&feature_norm.y, &feature_norm.x, &feature_norm.d}) {
    if (n->empty()) continue;
    require(n->mean.size() == freq_bins && n->std.size() == freq_bins, ErrorCode::kShape,
            "model config: feature_norm length must equal freq_bins");
    require((n->std.array() > 0.0).all(), ErrorCode::kInvalidArgument,
            "model config: feature_norm std must be positive");
  }
  (void)encoder_lengths();
}

std::vector<int> ModelConfig::encoder_lengths() const {
  std::vector<int> lens{freq_bins};
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    ad::ConvGeometry g{1, lens.back(), kernel_size, conv_stride, kernel_size / 2};
    require(g.out_len() > 0, ErrorCode::kInvalidArgument,
            "model config: too many conv layers for freq_bins");
    lens.push_back(g.out_len());
  }
  return lens;
}

void DiagGaussian::validate() const {
  require(mean.size() == log_var.size(), ErrorCode::kShape, "shape error");
  require(mean.allFinite() && log_var.allFinite(), ErrorCode::kNumerical, "non-finite gaussian");
}

namespace layers {

Dense add_dense(ParamStore& store, const std::string& name, int in, int out) {
  Dense d;
  d.w = store.add(name + "/w", out, in);
  d.b = store.add(name + "/b", out, 1);
  return d;
}

Trunk add_trunk(ParamStore& store, const std::string& prefix, const ModelConfig& cfg) {
  Trunk t;
  int in_ch = 1;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    const int out_ch = cfg.encoder_channels[i];
    const std::string name = prefix + "conv" + std::to_string(i);
    Conv c;
    c.w = store.add(name + "/w", out_ch, static_cast<Eigen::Index>(in_ch) * cfg.kernel_size);
    c.b = store.add(name + "/b", out_ch, 1);
    t.convs.push_back(c);
    in_ch = out_ch;
  }
  return t;
}

GaussianHead add_gaussian_head(ParamStore& store, const std::string& prefix, int in, int out) {
  return {add_dense(store, prefix + "mean", in, out), add_dense(store, prefix + "log_var", in, out)};
}

Decoder add_decoder(ParamStore& store, const std::string& prefix, const ModelConfig& cfg,
                    int latent_dim, bool gaussian) {
  const auto lens = cfg.encoder_lengths();
  const auto& ch = cfg.encoder_channels;
  const std::size_t n = ch.size();
  Decoder dec;
  dec.expand = add_dense(store, prefix + "expand", latent_dim, ch.back() * lens.back());
  for (std::size_t k = 0; k < n; ++k) {
    const int in_ch = k == 0 ? ch[n - 1] : ch[n - k];
    const int out_ch = ch[n - 1 - k];
    const std::string name = prefix + "conv" + std::to_string(k);
    Conv c;
    c.w = store.add(name + "/w", out_ch, static_cast<Eigen::Index>(in_ch) * cfg.kernel_size);
    c.b = store.add(name + "/b", out_ch, 1);
    dec.convs.push_back(c);
  }
  const int hidden = ch[0] * lens[1];
  dec.mean = add_dense(store, prefix + "mean", hidden, cfg.freq_bins);
  if (gaussian) dec.log_var = add_dense(store, prefix + "log_var", hidden, cfg.freq_bins);
  return dec;
}

ad::Var run_dense(ad::Tape& tape, const ParamStore& store, const Dense& layer, ad::Var x) {
  return tape.affine(tape.parameter(store, layer.w), x, tape.parameter(store, layer.b));
}

ad::Var run_trunk(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                  const Trunk& trunk, ad::Var frames) {
  require(frames.rows() == cfg.freq_bins, ErrorCode::kShape, "invalid feature frame: wrong length");
  require(frames.value().allFinite(), ErrorCode::kInvalidArgument, "invalid feature frame");
  const int batch = static_cast<int>(frames.cols());
  const auto lens = cfg.encoder_lengths();
  ad::Var h = tape.features_to_channels(frames, 1, batch, cfg.freq_bins);
  for (std::size_t i = 0; i < trunk.convs.size(); ++i) {
    ad::ConvGeometry g{batch, lens[i], cfg.kernel_size, cfg.conv_stride, cfg.kernel_size / 2};
    h = tape.relu(tape.conv1d(h, tape.parameter(store, trunk.convs[i].w),
                              tape.parameter(store, trunk.convs[i].b), g));
  }
  return tape.channels_to_features(h, batch, lens.back());
}

GaussianVars run_gaussian_head(ad::Tape& tape, const ParamStore& store, const GaussianHead& head,
                               ad::Var features) {
  ad::Var mean = run_dense(tape, store, head.mean, features);
  ad::Var log_var = tape.clamp(run_dense(tape, store, head.log_var, features), kLogVarMin, kLogVarMax);
  return {mean, log_var};
}

ad::Var run_decoder_body(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                         const Decoder& dec, ad::Var z) {
  require(z.rows() == store[dec.expand.w].value.cols(), ErrorCode::kShape,
          "latent dimension mismatch");
  require(z.value().allFinite(), ErrorCode::kInvalidArgument, "non-finite latent");
  const int batch = static_cast<int>(z.cols());
  const auto lens = cfg.encoder_lengths();
  const auto& ch = cfg.encoder_channels;
  const std::size_t n = ch.size();

  ad::Var h = tape.relu(run_dense(tape, store, dec.expand, z));
  h = tape.features_to_channels(h, ch.back(), batch, lens.back());
  int len = lens.back();
  for (std::size_t k = 0; k < n; ++k) {
    const int target = lens[n - k];
    if (target != len) {
      h = tape.upsample_nearest(h, batch, len, target);
      len = target;
    }
    ad::ConvGeometry g{batch, len, cfg.kernel_size, 1, cfg.kernel_size / 2};
    h = tape.relu(tape.conv1d(h, tape.parameter(store, dec.convs[k].w),
                              tape.parameter(store, dec.convs[k].b), g));
  }
  return tape.channels_to_features(h, batch, len);
}

GaussianVars run_gaussian_decoder(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                                  const Decoder& dec, ad::Var z) {
  require(dec.log_var.has_value(), ErrorCode::kInvalidArgument, "decoder has no variance head");
  ad::Var h = run_decoder_body(tape, store, cfg, dec, z);
  return {run_dense(tape, store, dec.mean, h),
          tape.clamp(run_dense(tape, store, *dec.log_var, h), kLogVarMin, kLogVarMax)};
}

int dense_fan_in(const Eigen::MatrixXd& w) { return static_cast<int>(w.cols()); }

void init_store(ParamStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& a = store[i];
    const bool is_bias = a.name.ends_with("/b");
    if (is_bias) {
      const bool log_var = a.name.ends_with("log_var/b");
      a.value.setConstant(log_var ? kLogVarBiasInit : 0.0);
      continue;
    }
    const double bound = std::sqrt(1.0 / dense_fan_in(a.value));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < a.value.size(); ++k) a.value.data()[k] = dist(rng);
    round_to_float(a.value);
  }
}

}  // namespace layers

PvaeModel build_model(const ModelConfig& cfg) {
  cfg.validate();
  PvaeModel m;
  m.config = cfg;
  auto& s = m.params;
  const auto lens = cfg.encoder_lengths();
  const int trunk_out = cfg.encoder_channels.back() * lens.back();

  m.cvae_trunk = layers::add_trunk(s, kSectionThetaX, cfg);
  m.cvae_head = layers::add_gaussian_head(s, kSectionThetaX, trunk_out, cfg.latent_dim_speech);
  m.cvae_decoder = layers::add_decoder(s, kSectionPhiX, cfg, cfg.latent_dim_speech, true);

  m.nvae_trunk = layers::add_trunk(s, kSectionThetaD, cfg);
  m.nvae_head = layers::add_gaussian_head(s, kSectionThetaD, trunk_out, cfg.latent_dim_noise);
  m.nvae_decoder = layers::add_decoder(s, kSectionPhiD, cfg, cfg.latent_dim_noise, true);

  const std::string ty = kSectionThetaY;
  if (cfg.nsvae_shared_trunk) {
    m.nsvae_trunk_x = layers::add_trunk(s, ty + "trunk/", cfg);
    m.nsvae_trunk_d = m.nsvae_trunk_x;
  } else {
    m.nsvae_trunk_x = layers::add_trunk(s, ty + "yx/trunk/", cfg);
    m.nsvae_trunk_d = layers::add_trunk(s, ty + "yd/trunk/", cfg);
  }
  m.nsvae_head_x = layers::add_gaussian_head(s, ty + "yx/", trunk_out, cfg.latent_dim_speech);
  m.nsvae_head_d = layers::add_gaussian_head(s, ty + "yd/", trunk_out, cfg.latent_dim_noise);
  m.nsvae_decoder = layers::add_decoder(s, kSectionPhiY, cfg, decoder_input_width(cfg), true);
  return m;
}

PvaeModel init_params(const ModelConfig& cfg, std::uint64_t seed) {
  PvaeModel m = build_model(cfg);
  layers::init_store(m.params, seed);
  return m;
}

int decoder_input_width(const ModelConfig& cfg) {
  return cfg.latent_dim_speech + cfg.latent_dim_noise;
}

void audit_shapes(const PvaeModel& model) {
  const PvaeModel ref = build_model(model.config);
  require(ref.params.size() == model.params.size(), ErrorCode::kShape,
          "shape audit: parameter count mismatch");
  for (std::size_t i = 0; i < ref.params.size(); ++i) {
    const auto& a = ref.params[i];
    const auto& b = model.params[i];
    require(a.name == b.name && a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols(),
            ErrorCode::kShape, "shape audit failed at " + b.name);
  }
}

namespace net {

GaussianVars cvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var x) {
  auto h = layers::run_trunk(tape, m.params, m.config, m.cvae_trunk, x);
  return layers::run_gaussian_head(tape, m.params, m.cvae_head, h);
}

GaussianVars cvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zx) {
  return layers::run_gaussian_decoder(tape, m.params, m.config, m.cvae_decoder, zx);
}

GaussianVars nvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var d) {
  auto h = layers::run_trunk(tape, m.params, m.config, m.nvae_trunk, d);
  return layers::run_gaussian_head(tape, m.params, m.nvae_head, h);
}

GaussianVars nvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zd) {
  return layers::run_gaussian_decoder(tape, m.params, m.config, m.nvae_decoder, zd);
}

std::pair<GaussianVars, GaussianVars> nsvae_encode(ad::Tape& tape, const PvaeModel& m, ad::Var y) {
  auto hx = layers::run_trunk(tape, m.params, m.config, m.nsvae_trunk_x, y);
  auto hd = m.config.nsvae_shared_trunk
                ? hx
                : layers::run_trunk(tape, m.params, m.config, m.nsvae_trunk_d, y);
  return {layers::run_gaussian_head(tape, m.params, m.nsvae_head_x, hx),
          layers::run_gaussian_head(tape, m.params, m.nsvae_head_d, hd)};
}

GaussianVars nsvae_decode(ad::Tape& tape, const PvaeModel& m, ad::Var zx, ad::Var zd) {
  require(zx.rows() == m.config.latent_dim_speech && zd.rows() == m.config.latent_dim_noise,
          ErrorCode::kShape, "latent dimension mismatch");
  return layers::run_gaussian_decoder(tape, m.params, m.config, m.nsvae_decoder,
                                      tape.concat_rows(zx, zd));
}

ad::Var reparameterize(ad::Tape& tape, const GaussianVars& g, const Eigen::MatrixXd& eps) {
  require(eps.rows() == g.mean.rows() && eps.cols() == g.mean.cols(), ErrorCode::kShape,
          "shape error");
  ad::Var sigma = tape.exp(tape.scale(g.log_var, 0.5));
  return tape.add(g.mean, tape.mul(sigma, tape.constant(eps)));
}

}  // namespace net

namespace {

GaussianBatch to_batch(const net::GaussianVars& g) { return {g.mean.value(), g.log_var.value()}; }

void check_latent(const Eigen::MatrixXd& z, int dim) {
  require(z.rows() == dim, ErrorCode::kShape, "latent dimension mismatch");
}

}  // namespace

GaussianBatch cvae_encode(const PvaeModel& m, const Eigen::MatrixXd& x_frames) {
  ad::Tape tape(false);
  return to_batch(net::cvae_encode(tape, m, tape.constant(x_frames)));
}

GaussianBatch cvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zx) {
  check_latent(zx, m.config.latent_dim_speech);
  ad::Tape tape(false);
  return to_batch(net::cvae_decode(tape, m, tape.constant(zx)));
}

GaussianBatch nvae_encode(const PvaeModel& m, const Eigen::MatrixXd& d_frames) {
  ad::Tape tape(false);
  return to_batch(net::nvae_encode(tape, m, tape.constant(d_frames)));
}

GaussianBatch nvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zd) {
  check_latent(zd, m.config.latent_dim_noise);
  ad::Tape tape(false);
  return to_batch(net::nvae_decode(tape, m, tape.constant(zd)));
}

std::pair<GaussianBatch, GaussianBatch> nsvae_encode(const PvaeModel& m,
                                                     const Eigen::MatrixXd& y_frames) {
  ad::Tape tape(false);
  auto [gx, gd] = net::nsvae_encode(tape, m, tape.constant(y_frames));
  return {to_batch(gx), to_batch(gd)};
}

GaussianBatch nsvae_decode(const PvaeModel& m, const Eigen::MatrixXd& zx,
                           const Eigen::MatrixXd& zd) {
  check_latent(zx, m.config.latent_dim_speech);
  check_latent(zd, m.config.latent_dim_noise);
  ad::Tape tape(false);
  return to_batch(net::nsvae_decode(tape, m, tape.constant(zx), tape.constant(zd)));
}

DiagGaussian cvae_encode(const PvaeModel& m, const Eigen::VectorXd& x_frame) {
  return cvae_encode(m, Eigen::MatrixXd(x_frame)).column(0);
}

DiagGaussian cvae_decode(const PvaeModel& m, const LatentSample& zx) {
  require(zx.group == LatentGroup::kSpeech, ErrorCode::kInvalidArgument,
          "latent group mismatch: expected speech");
  return cvae_decode(m, Eigen::MatrixXd(zx.z)).column(0);
}

DiagGaussian nvae_encode(const PvaeModel& m, const Eigen::VectorXd& d_frame) {
  return nvae_encode(m, Eigen::MatrixXd(d_frame)).column(0);
}

DiagGaussian nvae_decode(const PvaeModel& m, const LatentSample& zd) {
  require(zd.group == LatentGroup::kNoise, ErrorCode::kInvalidArgument,
          "latent group mismatch: expected noise");
  return nvae_decode(m, Eigen::MatrixXd(zd.z)).column(0);
}

std::pair<DiagGaussian, DiagGaussian> nsvae_encode(const PvaeModel& m,
                                                   const Eigen::VectorXd& y_frame) {
  auto [gx, gd] = nsvae_encode(m, Eigen::MatrixXd(y_frame));
  return {gx.column(0), gd.column(0)};
}

DiagGaussian nsvae_decode(const PvaeModel& m, const LatentSample& zx, const LatentSample& zd) {
  require(zx.group == LatentGroup::kSpeech && zd.group == LatentGroup::kNoise,
          ErrorCode::kInvalidArgument, "latent group mismatch");
  return nsvae_decode(m, Eigen::MatrixXd(zx.z), Eigen::MatrixXd(zd.z)).column(0);
}

LatentSample reparameterize(const DiagGaussian& g, const Eigen::VectorXd& eps, LatentGroup group) {
  require(eps.size() == g.size() && g.mean.size() == g.log_var.size(), ErrorCode::kShape,
          "shape error");
  LatentSample s;
  s.group = group;
  s.z = g.mean.array() + (0.5 * g.log_var.array()).exp() * eps.array();
  return s;
}

}  // namespace pvae
