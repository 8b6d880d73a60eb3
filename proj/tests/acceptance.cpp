// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"

#include "core/baseline.hpp"
#include "core/checkpoint.hpp"
#include "core/corpus.hpp"
#include "core/dataset.hpp"
#include "core/enhance.hpp"
#include "core/gradcheck.hpp"
#include "core/metrics.hpp"
#include "core/synth.hpp"
#include "core/training.hpp"
#include "core/vloss.hpp"

using namespace pvae;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double secs) {
  std::printf("criterion %d %s: %s  %s  [%.1fs]\n", id, name, pass ? "PASS" : "FAIL", detail.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void info(const std::string& line) {
  std::printf("  info: %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

// Means N(0, 1), log-variances U(-0.5, 0.5). The estimator's spread grows with the
// variance ratio of the two Gaussians, so the standard error is reported alongside.
DiagGaussian oracle_gaussian(std::mt19937_64& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> lv(-0.5, 0.5);
  DiagGaussian g;
  g.mean = testing::randn(rng, dim);
  g.log_var.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) g.log_var[i] = lv(rng);
  return g;
}

void kl_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 8);
  constexpr int kDraws = 100000;
  double worst = 0.0, worst_se = 0.0;
  // Antithetic pairs (eps, -eps); each pair mean is one independent draw.
  auto check = [&](double exact, const DiagGaussian& a, const DiagGaussian* b) {
    double acc = 0.0, sq = 0.0;
    for (int i = 0; i < kDraws / 2; ++i) {
      const Eigen::VectorXd e = testing::randn(rng, a.size());
      double pair = 0.0;
      for (const Eigen::VectorXd& eps : {e, Eigen::VectorXd(-e)}) {
        const Eigen::VectorXd z = reparameterize(a, eps, LatentGroup::kSpeech).z;
        pair += 0.5 * (gaussian_log_density(z, a) - (b ? gaussian_log_density(z, *b) : standard_log_density(z)));
      }
      acc += pair;
      sq += pair * pair;
    }
    const double n = kDraws / 2.0, mean = acc / n;
    worst = std::max(worst, std::abs(exact - mean));
    worst_se = std::max(worst_se, std::sqrt(std::max(sq / n - mean * mean, 0.0) / n));
  };
  for (int k = 0; k < 50; ++k) {
    const int n = dim(rng);
    const DiagGaussian a = oracle_gaussian(rng, n);
    const DiagGaussian b = oracle_gaussian(rng, n);
    check(kl_diag_standard(a), a, nullptr);
    check(kl_diag_diag(a, b), a, &b);
  }
  const double secs = seconds_since(t0);
  report(1, "kl oracle", worst < 0.02 && secs < 30.0,
         fmt("max |closed - mc| = %.4f nats over 50 pairs (largest mc std error %.4f)", worst, worst_se), secs);
}

// ---------------------------------------------------------------- 2

void rewrite_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  constexpr int kDraws = 100000;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const PvaeModel m = init_params(testing::tiny_config(), 500 + static_cast<std::uint64_t>(k));
    const Eigen::VectorXd y = testing::randn(rng, 17), x = testing::randn(rng, 17), d = testing::randn(rng, 17);
    const auto [qx, qd] = nsvae_encode(m, y);
    double with_supervision = 0.0, with_prior = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const Eigen::VectorXd ex = testing::randn(rng, 4), ed = testing::randn(rng, 4);
      const LossBreakdown b = permutation_loss(y, x, d, m, ex, ed);
      const Eigen::VectorXd zx = reparameterize(qx, ex, LatentGroup::kSpeech).z;
      const Eigen::VectorXd zd = reparameterize(qd, ed, LatentGroup::kNoise).z;
      with_supervision += b.kl_speech + b.kl_noise + b.ratio_speech + b.ratio_noise + b.nll_y;
      with_prior += gaussian_log_density(zx, qx) - standard_log_density(zx) + gaussian_log_density(zd, qd) -
                    standard_log_density(zd) + b.nll_y;
    }
    worst = std::max(worst, std::abs(with_supervision - with_prior) / kDraws);
  }
  const double secs = seconds_since(t0);
  report(2, "rewrite exactness", worst < 0.02 && secs < 120.0,
         fmt("max |E[supervised form] - E[prior form]| = %.4f over 10 models", worst), secs);
}

// ---------------------------------------------------------------- 3

void gradient_check() {
  const auto t0 = Clock::now();
  const GradCheckReport r = gradcheck_total_loss(3);
  const double secs = seconds_since(t0);
  report(3, "gradients", r.max_rel_err < 1e-4 && r.checked > 0 && secs < 120.0,
         fmt("max rel err %.2e over %zu coordinates (worst %s)", r.max_rel_err, r.checked, r.worst_param.c_str()),
         secs);
}

// ---------------------------------------------------------------- 4

std::vector<double> interior(const std::vector<double>& v, std::size_t n, std::size_t margin) {
  return std::vector<double>(v.begin() + static_cast<long>(margin), v.begin() + static_cast<long>(n - margin));
}

void dsp_fidelity() {
  const auto t0 = Clock::now();
  double round_trip = 1e9;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Waveform w = synth_speech(300 + s, 3.0);
    const Waveform back = istft(stft(w));
    round_trip = std::min(round_trip, si_sdr(interior(back.samples, back.size(), 512), interior(w.samples, back.size(), 512)));
  }
  double snr_err = 0.0;
  for (double snr : {-10.0, -5.0, 0.0, 3.3, 5.0, 10.0, 20.0}) {
    const auto m = mix_at_snr(synth_speech(310, 2.0), synth_noise(NoiseKind::kBabble, 311, 2.0), snr);
    double px = 0.0, pd = 0.0;
    for (std::size_t i = 0; i < m.x.size(); ++i) {
      px += m.x.samples[i] * m.x.samples[i];
      pd += m.d.samples[i] * m.d.samples[i];
    }
    snr_err = std::max(snr_err, std::abs(10.0 * std::log10(px / pd) - snr));
  }
  double gain = 0.0;
  constexpr int kItems = 6;
  for (int s = 0; s < kItems; ++s) {
    const auto kind = s % 2 ? NoiseKind::kTonal : NoiseKind::kBabble;
    const auto m = mix_at_snr(synth_speech(320 + s, 3.0), synth_noise(kind, 330 + s, 3.0), 0.0);
    const Spectrogram sy = stft(m.y);
    const auto r = mask_from_estimates(sy, {lps(stft(m.x)).values, lps(stft(m.d)).values});
    const std::vector<double> ref(m.x.samples.begin(), m.x.samples.begin() + static_cast<long>(r.audio.size()));
    gain += (si_sdr(r.audio.samples, ref) - si_sdr(m.y, m.x)) / kItems;
  }
  const double secs = seconds_since(t0);
  report(4, "dsp fidelity", round_trip > 50.0 && snr_err < 1e-9 && gain >= 5.0 && secs < 60.0,
         fmt("round trip %.1f dB, snr err %.1e dB, oracle mask gain %.2f dB", round_trip, snr_err, gain), secs);
}

// ---------------------------------------------------------------- 5-7

constexpr int kTrainUtterances = 40;
constexpr double kTrainSeconds = 15.0;  // 40 x 15 s = 10 min of speech
constexpr int kPretrainEpochs = 12;
constexpr int kJointEpochs = 12;
const std::vector<double> kSnrs{-5.0, 0.0, 5.0, 10.0};

std::vector<Waveform> desk_noises(std::uint64_t seed, double seconds) {
  return {synth_noise(NoiseKind::kBabble, seed, seconds), synth_noise(NoiseKind::kTonal, seed + 1, seconds)};
}

// Round robin: utterance i gets noise i % 2 at snr (i / 2) % 4.
std::vector<MixtureExample> desk_train() {
  const auto noise = desk_noises(11, 60.0);
  std::vector<MixtureExample> out;
  for (int i = 0; i < kTrainUtterances; ++i) {
    const Waveform x = synth_speech(1000 + static_cast<std::uint64_t>(i), kTrainSeconds);
    const auto& n = noise[static_cast<std::size_t>(i) % 2];
    out.push_back(quantize_mixture(
        mix_at_snr(x, noise_segment(n, x.size(), static_cast<std::size_t>(i)), kSnrs[(static_cast<std::size_t>(i) / 2) % 4])));
  }
  return out;
}

// Held-out utterances and noise realizations, every utterance x noise x snr.
// Index layout: ((u * 2 + noise) * 4 + snr).
std::vector<MixtureExample> desk_test() {
  const auto noise = desk_noises(21, 60.0);
  std::vector<MixtureExample> out;
  std::size_t idx = 0;
  for (int u = 0; u < 6; ++u) {
    const Waveform x = synth_speech(5000 + static_cast<std::uint64_t>(u), 4.0);
    for (const auto& n : noise) {
      for (double snr : kSnrs) out.push_back(quantize_mixture(mix_at_snr(x, noise_segment(n, x.size(), idx++), snr)));
    }
  }
  return out;
}

Checkpoint desk_training(const std::vector<MixtureExample>& train) {
  const auto t0 = Clock::now();
  const FrameDataset data = dataset_from_mixtures(train);
  ModelConfig mc;
  mc.latent_dim_speech = 32;
  mc.latent_dim_noise = 32;
  mc.encoder_channels = {8, 16, 32, 32};
  TrainConfig tc;
  tc.epochs_pretrain = kPretrainEpochs;
  tc.epochs_joint = kJointEpochs;
  tc.seed = 7;
  info(fmt("desk corpus %d frames (%.1f min of speech), latent %d, F=%d", data.size(),
           kTrainUtterances * kTrainSeconds / 60.0, mc.latent_dim_speech, data.bins()));

  std::vector<int> probe(2000);
  for (int i = 0; i < 2000; ++i) probe[static_cast<std::size_t>(i)] = static_cast<int>((static_cast<long>(i) * 17) % data.size());
  ModelConfig normed = mc;
  normed.feature_norm = rounded_norms(data.norms);
  const LossBreakdown initial = evaluate_total_loss(init_params(normed, tc.seed), data, probe, 99);

  auto progress = [&](const EpochLog& e) {
    std::printf("    %s  [%.0fs]\n", format_log_line(e).c_str(), seconds_since(t0));
    std::fflush(stdout);
  };
  const TrainResult pre = pretrain_priors(data, mc, tc, progress);
  const LossBreakdown start = evaluate_total_loss(model_from_checkpoint(pre.checkpoint), data, probe, 99);
  const TrainResult joint = train_joint(data, pre.checkpoint, tc, progress);
  const LossBreakdown end = evaluate_total_loss(model_from_checkpoint(joint.checkpoint), data, probe, 99);
  const double secs = seconds_since(t0);

  const bool total_ok = end.total < 0.5 * initial.total;
  const bool kls_ok = end.kl_speech <= 0.5 * start.kl_speech;
  const bool kln_ok = end.kl_noise <= 0.5 * start.kl_noise;
  report(5, "desk training", total_ok && kls_ok && kln_ok && secs < 1800.0,
         fmt("total %.1f -> %.1f (x%.3f); joint kl_s %.1f -> %.2f, kl_n %.1f -> %.2f", initial.total, end.total,
             end.total / initial.total, start.kl_speech, end.kl_speech, start.kl_noise, end.kl_noise),
         secs);
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < joint.log.size(); ++i) {
    const double prev = joint.log[i - 1].losses.total;
    worst_rise = std::max(worst_rise, (joint.log[i].losses.total - prev) / std::abs(prev));
  }
  info(fmt("largest epoch-to-epoch rise of the logged joint total: %+.1f%% (monotone within +1%%: %s)",
           100.0 * worst_rise, worst_rise <= 0.01 ? "yes" : "no"));
  return joint.checkpoint;
}

double mean_at(const EvalReport& r, double snr, bool enhanced) {
  for (const auto& row : r.rows) {
    if (row.snr_db == snr) return enhanced ? row.enh_mean : row.noisy_mean;
  }
  return std::nan("");
}

void enhancement_trend(const Checkpoint& joint, const std::vector<MixtureExample>& train,
                       const std::vector<MixtureExample>& test) {
  const auto t0 = Clock::now();
  auto run = [&](const Enhancer& e) { return evaluate_corpus([&](const Waveform& w) { return e(w); }, test); };
  const EvalReport m = run(Enhancer(EnhanceMode::kPvaeM, joint));
  const EvalReport l = run(Enhancer(EnhanceMode::kPvaeL, joint));
  const double noisy = mean_at(m, 0.0, false), pm = mean_at(m, 0.0, true), pl = mean_at(l, 0.0, true);
  const double secs = seconds_since(t0);
  report(6, "enhancement trend", pm - noisy >= 2.0 && pm >= pl && pl >= noisy,
         fmt("0 dB means: noisy %.2f, pvae-l %.2f, pvae-m %.2f (gain %+.2f dB)", noisy, pl, pm, pm - noisy), secs);
  std::istringstream lines(format_report(m));
  for (std::string line; std::getline(lines, line);) info("pvae-m  " + line);
  std::istringstream llines(format_report(l));
  for (std::string line; std::getline(llines, line);) info("pvae-l  " + line);

  // Baseline comparison, outside the criteria.
  const auto tb = Clock::now();
  const FrameDataset data = dataset_from_mixtures(train);
  ModelConfig mc;
  mc.encoder_channels = {8, 16, 32, 32};
  TrainConfig tc;
  tc.epochs_baseline = kJointEpochs;
  tc.seed = 7;
  const TrainResult base = train_baseline(data, mc, tc);
  const double ym = mean_at(run(Enhancer(EnhanceMode::kYM, base.checkpoint)), 0.0, true);
  info(fmt("y-m at 0 dB %.2f vs pvae-m %.2f (pvae-m >= y-m: %s) [%.0fs]", ym, pm, pm >= ym ? "yes" : "no",
           seconds_since(tb)));
}

void disentanglement(const Checkpoint& joint, const std::vector<MixtureExample>& test) {
  const auto t0 = Clock::now();
  const PvaeModel model = model_from_checkpoint(joint);
  long closer = 0, frames = 0;
  for (int u = 0; u < 6; ++u) {
    for (int s = 0; s < 4; ++s) {
      const auto& a = test[static_cast<std::size_t>((u * 2 + 0) * 4 + s)];  // babble
      const auto& b = test[static_cast<std::size_t>((u * 2 + 1) * 4 + s)];  // tonal, same speech
      const SwapResult sw = latent_swap(a.y, b.y, model);
      const Eigen::VectorXd to_target = frame_lps_distance(sw.modified.values, sw.lps_b.values);
      const Eigen::VectorXd to_source = frame_lps_distance(sw.modified.values, sw.lps_a.values);
      for (Eigen::Index i = 0; i < to_target.size(); ++i) closer += to_target[i] < to_source[i];
      frames += to_target.size();
    }
  }
  double identity = 0.0;
  for (int u = 0; u < 6; ++u) {
    const auto& a = test[static_cast<std::size_t>(u * 8 + 1)];
    identity = std::max(identity, lps_distance(latent_swap(a.y, a.y, model).modified.values,
                                               nsvae_reconstruct(a.y, model).values));
  }
  const double share = static_cast<double>(closer) / static_cast<double>(frames);
  report(7, "disentanglement", share >= 0.8 && identity < 1e-6,
         fmt("%.1f%% of %ld frames closer to the target noise; swap(A, A) distance %.1e", 100.0 * share, frames,
             identity),
         seconds_since(t0));
}

// ---------------------------------------------------------------- 8

void metric_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> ref(4096), est(4096), w(4096);
  for (auto& v : ref) v = 0.3 * n(rng);
  for (std::size_t i = 0; i < ref.size(); ++i) est[i] = ref[i] + 0.1 * n(rng);
  const double base = si_sdr(est, ref);
  double scale_err = 0.0;
  for (double a : {1e-3, 0.5, 2.0, 37.0, -3.0}) {
    std::vector<double> s = est;
    for (auto& v : s) v *= a;
    scale_err = std::max(scale_err, std::abs(si_sdr(s, ref) - base));
  }
  // Zero-mean noise orthogonal to the zero-mean reference at power ratio 10.
  auto centre = [](std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (auto& x : v) x -= m;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };
  centre(ref);
  for (auto& v : w) v = n(rng);
  centre(w);
  const double c = dot(w, ref) / dot(ref, ref);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * ref[i];
  const double k = std::sqrt(dot(ref, ref) / (10.0 * dot(w, w)));
  std::vector<double> mix(ref.size());
  for (std::size_t i = 0; i < w.size(); ++i) mix[i] = ref[i] + k * w[i];
  const double ten = si_sdr(mix, ref);
  report(8, "metric correctness", scale_err < 1e-9 && std::abs(ten - 10.0) < 1e-9,
         fmt("scale invariance err %.1e dB, orthogonal case %.12f dB", scale_err, ten), seconds_since(t0));
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void reproducibility() {
  const auto t0 = Clock::now();
  testing::TempDir dir("accept");
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << "latent_dim_speech = 8\nlatent_dim_noise = 8\nencoder_channels = 4, 8\n"
                        "epochs_pretrain = 2\nepochs_joint = 2\nsynth_utterances = 4\n"
                        "synth_utterance_seconds = 2\nsynth_noise_seconds = 6\nseed = 13\n";
  bool ok = true;
  auto sh = [&](const std::string& args) {
    const std::string cmd = std::string("'") + PVAE_CLI_PATH + "' --config '" + cfg.string() + "' " + args +
                            " >/dev/null 2>>'" + (dir / "stderr.txt").string() + "'";
    ok = ok && std::system(cmd.c_str()) == 0;
  };
  for (const char* tag : {"a", "b"}) {
    const std::string p = (dir / tag).string();
    sh("--out '" + p + "_corpus' synth --generate");
    sh("--out '" + p + "_pre.ckpt' pretrain --corpus '" + p + "_corpus'");
    sh("--out '" + p + "_joint.ckpt' train --corpus '" + p + "_corpus' --ckpt '" + p + "_pre.ckpt'");
    sh("--out '" + p + "_report.tsv' eval --corpus '" + p + "_corpus' --mode pvae-m --ckpt '" + p + "_joint.ckpt'");
  }
  auto same = [&](const std::string& suffix) {
    const std::string a = slurp(dir / ("a" + suffix)), b = slurp(dir / ("b" + suffix));
    return !a.empty() && a == b;
  };
  const bool ckpts = same("_pre.ckpt") && same("_joint.ckpt");
  const bool reports = same("_report.tsv");
  report(9, "reproducibility", ok && ckpts && reports,
         fmt("commands %s, checkpoints %s, reports %s", ok ? "ok" : "failed", ckpts ? "identical" : "differ",
             reports ? "identical" : "differ"),
         seconds_since(t0));
}

}  // namespace

// Optional arguments select criteria by number; the desk run serves 5 to 7.
int main(int argc, char** argv) {
  std::vector<bool> want(10, argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= 9) want[static_cast<std::size_t>(k)] = true;
  }
  const auto t0 = Clock::now();
  try {
    if (want[1]) kl_oracle();
    if (want[2]) rewrite_exactness();
    if (want[3]) gradient_check();
    if (want[4]) dsp_fidelity();
    if (want[5] || want[6] || want[7]) {
      const auto train = desk_train();
      const auto test = desk_test();
      const Checkpoint joint = desk_training(train);
      if (want[6]) enhancement_trend(joint, train, test);
      if (want[7]) disentanglement(joint, test);
    }
    if (want[8]) metric_correctness();
    if (want[9]) reproducibility();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d criteria failed [%.0fs]\n", g_failures ? "FAIL" : "PASS", g_failures, seconds_since(t0));
  return g_failures ? 1 : 0;
}
