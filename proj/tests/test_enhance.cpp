#include "doctest.h"
#include "support.hpp"

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/enhance.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/synth.hpp"
#include "core/training.hpp"

using namespace pvae;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.latent_dim_speech = 4;
  c.latent_dim_noise = 4;
  c.encoder_channels = {2, 3};
  return c;
}

const FrameDataset& small_data() {
  static const FrameDataset d = build_dataset({synth_speech(11, 1.0), synth_speech(12, 1.0)},
                                              {synth_noise(NoiseKind::kBabble, 13, 3.0)}, {0.0});
  return d;
}

TrainConfig quick() {
  TrainConfig t;
  t.epochs_pretrain = 1;
  t.epochs_joint = 1;
  t.epochs_baseline = 1;
  t.batch_size = 64;
  t.seed = 2;
  return t;
}

const Checkpoint& pretrained() {
  static const Checkpoint c = pretrain_priors(small_data(), small_model(), quick()).checkpoint;
  return c;
}

const Checkpoint& joint() {
  static const Checkpoint c = train_joint(small_data(), pretrained(), quick()).checkpoint;
  return c;
}

const Checkpoint& baseline() {
  static const Checkpoint c = train_baseline(small_data(), small_model(), quick()).checkpoint;
  return c;
}

MixtureExample mixture(double snr, std::uint64_t seed, double seconds = 1.3) {
  return mix_at_snr(synth_speech(seed, seconds), synth_noise(NoiseKind::kTonal, seed + 1, seconds), snr);
}

ErrorCode error_of(const std::function<void()>& fn, std::string* msg = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("passthrough returns the input") {
  const auto m = mixture(0.0, 1);
  const Enhancer e(EnhanceMode::kPassthrough);
  CHECK(e(m.y).samples == m.y.samples);
  CHECK_THROWS_AS(Enhancer(EnhanceMode::kPvaeM), Error);
}

TEST_CASE("mode names round trip") {
  for (auto m : {EnhanceMode::kPvaeL, EnhanceMode::kPvaeM, EnhanceMode::kYL, EnhanceMode::kYM, EnhanceMode::kPassthrough}) {
    CHECK(parse_enhance_mode(enhance_mode_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_enhance_mode("pvae-x"), Error);
}

TEST_CASE("outputs are finite, deterministic and follow istft bookkeeping") {
  const auto m = mixture(0.0, 3, 1.2345);
  const int frames = frame_count(m.y.size(), Framing{});
  for (auto mode : {EnhanceMode::kPvaeL, EnhanceMode::kPvaeM, EnhanceMode::kYL, EnhanceMode::kYM}) {
    const bool base = mode == EnhanceMode::kYL || mode == EnhanceMode::kYM;
    const Enhancer e(mode, base ? baseline() : joint());
    const auto a = e(m.y);
    const auto b = e(m.y);
    CHECK(a.size() == istft_length(Framing{}, frames));
    CHECK(a.samples == b.samples);
    for (double v : a.samples) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("sampling mode is seeded") {
  const auto m = mixture(5.0, 4);
  const PvaeModel model = model_from_checkpoint(joint());
  EnhanceOptions o;
  o.samples = 3;
  o.seed = 8;
  const auto a = enhance_mask(m.y, model, o).audio;
  const auto b = enhance_mask(m.y, model, o).audio;
  o.seed = 9;
  const auto c = enhance_mask(m.y, model, o).audio;
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  o.samples = -1;
  CHECK_THROWS_AS(enhance_mask(m.y, model, o), Error);
}

TEST_CASE("pvae-m mask stays in [0, 1]") {
  const auto m = mixture(-5.0, 5);
  const auto r = enhance_mask(m.y, model_from_checkpoint(joint()));
  REQUIRE(r.mask.has_value());
  CHECK(r.mask->gains.minCoeff() >= 0.0);
  CHECK(r.mask->gains.maxCoeff() <= 1.0);
  CHECK(r.mask->gains.rows() == 257);
}

TEST_CASE("oracle estimates on the mask path give at least 5 dB at 0 dB") {
  double gain = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto m = mixture(0.0, 40 + s, 2.0);
    const Spectrogram sy = stft(m.y);
    const auto r = mask_from_estimates(sy, {lps(stft(m.x)).values, lps(stft(m.d)).values});
    gain += (si_sdr(r.audio, Waveform{std::vector<double>(m.x.samples.begin(), m.x.samples.begin() + r.audio.size())}) -
             si_sdr(m.y, m.x)) / 4.0;
  }
  INFO("oracle mask gain " << gain);
  CHECK(gain >= 5.0);
}

TEST_CASE("an all-ones mask returns the noisy input") {
  const auto m = mixture(0.0, 6, 2.0);
  const Spectrogram sy = stft(m.y);
  Mask ones{Eigen::MatrixXd::Ones(sy.bins(), sy.num_frames())};
  const auto out = istft(apply_mask(sy, ones));
  const std::size_t n = out.size();
  std::vector<double> a(out.samples.begin() + 512, out.samples.begin() + static_cast<long>(n) - 512);
  std::vector<double> b(m.y.samples.begin() + 512, m.y.samples.begin() + static_cast<long>(n) - 512);
  CHECK(si_sdr(a, b) > 50.0);
}

TEST_CASE("latent swap") {
  const PvaeModel model = model_from_checkpoint(joint());
  const auto a = mixture(5.0, 7);
  const auto b = mix_at_snr(a.x, synth_noise(NoiseKind::kBabble, 50, 1.3), 10.0);
  const auto same = latent_swap(a.y, a.y, model);
  CHECK(lps_distance(same.modified, nsvae_reconstruct(a.y, model)) < 1e-6);
  const auto sw = latent_swap(a.y, b.y, model);
  CHECK(lps_distance(sw.modified, sw.lps_a) > 0.0);
  CHECK(lps_distance(sw.modified, same.modified) > 0.0);
  CHECK(sw.audio.size() == istft_length(Framing{}, frame_count(a.y.size(), Framing{})));
  for (double v : sw.audio.samples) REQUIRE(std::isfinite(v));
  std::string msg;
  const Waveform shorter{std::vector<double>(b.y.samples.begin(), b.y.samples.end() - 10)};
  CHECK(error_of([&] { latent_swap(a.y, shorter, model); }, &msg) == ErrorCode::kInvalidArgument);
  CHECK(msg.find("inputs must be aligned") != std::string::npos);
}

TEST_CASE("stage checks") {
  std::string msg;
  CHECK(error_of([] { Enhancer(EnhanceMode::kPvaeL, pretrained()); }, &msg) == ErrorCode::kStage);
  CHECK(msg.find("model not jointly trained") != std::string::npos);
  CHECK(error_of([] { Enhancer(EnhanceMode::kPvaeM, baseline()); }) == ErrorCode::kStage);
  CHECK(error_of([] { Enhancer(EnhanceMode::kYM, joint()); }) == ErrorCode::kStage);
}

TEST_CASE("y-cnn default widths") {
  const auto m = build_baseline(ModelConfig{});
  CHECK(m.params[m.latent.w].value.rows() == 128);
  CHECK(m.params[m.decoder_x.mean.w].value.rows() == 257);
  CHECK(m.params[m.decoder_d.mean.w].value.rows() == 257);
  CHECK_FALSE(m.decoder_x.log_var.has_value());
}
