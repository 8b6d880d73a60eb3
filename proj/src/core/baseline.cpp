#include "core/baseline.hpp"

#include "core/error.hpp"

namespace pvae {

BaselineModel build_baseline(const ModelConfig& cfg) {
  cfg.validate();
  BaselineModel m;
  m.config = cfg;
  const auto lens = cfg.encoder_lengths();
  const int trunk_out = cfg.encoder_channels.back() * lens.back();
  const std::string p = kSectionBaseline;
  m.trunk = layers::add_trunk(m.params, p + "enc/", cfg);
  m.latent = layers::add_dense(m.params, p + "enc/latent", trunk_out, cfg.latent_dim_speech);
  m.decoder_x = layers::add_decoder(m.params, p + "dec_x/", cfg, cfg.latent_dim_speech, false);
  m.decoder_d = layers::add_decoder(m.params, p + "dec_d/", cfg, cfg.latent_dim_speech, false);
  return m;
}

BaselineModel init_baseline(const ModelConfig& cfg, std::uint64_t seed) {
  BaselineModel m = build_baseline(cfg);
  layers::init_store(m.params, seed);
  return m;
}

namespace net {

BaselineOutputs baseline_forward(ad::Tape& tape, const BaselineModel& m, ad::Var y) {
  ad::Var h = layers::run_trunk(tape, m.params, m.config, m.trunk, y);
  ad::Var z = layers::run_dense(tape, m.params, m.latent, h);
  auto head = [&](const layers::Decoder& dec) {
    return layers::run_dense(tape, m.params, dec.mean,
                             layers::run_decoder_body(tape, m.params, m.config, dec, z));
  };
  return {head(m.decoder_x), head(m.decoder_d)};
}

}  // namespace net

namespace losses {

BaselineTerms baseline_loss(ad::Tape& tape, const BaselineModel& m, const TripletBatch& batch) {
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  auto out = net::baseline_forward(tape, m, tape.constant(batch.y));
  auto sse = [&](ad::Var est, const Eigen::MatrixXd& target) {
    return tape.scale(tape.sum(tape.square(tape.sub(est, tape.constant(target)))), inv_batch);
  };
  BaselineTerms t;
  t.speech = sse(out.speech, batch.x);
  t.noise = sse(out.noise, batch.d);
  t.total = tape.add(t.speech, t.noise);
  return t;
}

}  // namespace losses

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> baseline_predict(const BaselineModel& m,
                                                             const Eigen::MatrixXd& y_frames) {
  ad::Tape tape(false);
  auto out = net::baseline_forward(tape, m, tape.constant(y_frames));
  return {out.speech.value(), out.noise.value()};
}

}  // namespace pvae
