#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core/error.hpp"
#include "core/training.hpp"
#include "core/vloss.hpp"

namespace pvae {
namespace {

struct TestPoint {
  PvaeModel model;
  TripletBatch batch;
  EpsDraws eps;
};

TestPoint draw_point(std::uint64_t seed, int batch) {
  const ModelConfig cfg = gradcheck_config();
  TestPoint p{init_params(cfg, seed), {}, {}};
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (std::size_t i = 0; i < p.model.params.size(); ++i) {
    auto& a = p.model.params[i];
    if (a.name.ends_with("/b")) {
      for (Eigen::Index k = 0; k < a.value.size(); ++k) a.value.data()[k] += jitter(rng);
    }
  }
  p.batch = {standard_normal(rng, cfg.freq_bins, batch), standard_normal(rng, cfg.freq_bins, batch),
             standard_normal(rng, cfg.freq_bins, batch)};
  p.eps = draw_eps(rng, cfg, batch);
  return p;
}

std::pair<double, std::uint64_t> evaluate(const TestPoint& p) {
  ad::Tape tape(false);
  tape.track_activations(true);
  const double v = losses::total_loss(tape, p.model, p.batch, p.eps).total.scalar();
  return {v, tape.activation_signature()};
}

}  // namespace

ModelConfig gradcheck_config() {
  ModelConfig c;
  c.freq_bins = 17;
  c.latent_dim_speech = 4;
  c.latent_dim_noise = 4;
  c.encoder_channels = {2, 3};
  return c;
}

GradCheckReport gradcheck_total_loss(std::uint64_t seed, int batch, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    TestPoint p = draw_point(seed + static_cast<std::uint64_t>(attempt) * 1000003ull, batch);
    const std::uint64_t base = evaluate(p).second;
    const GradStore analytic = total_loss_gradients(p.model, p.batch, p.eps).grads;

    GradCheckReport r;
    r.attempts = attempt + 1;
    bool kink = false;
    for (std::size_t i = 0; i < p.model.params.size() && !kink; ++i) {
      auto& w = p.model.params[i].value;
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        const double orig = w.data()[k];
        w.data()[k] = orig + kGradCheckStep;
        const auto up = evaluate(p);
        w.data()[k] = orig - kGradCheckStep;
        const auto down = evaluate(p);
        w.data()[k] = orig;
        if (up.second != base || down.second != base) {
          kink = true;
          break;
        }
        const double fd = (up.first - down.first) / (2.0 * kGradCheckStep);
        const double a = analytic[i].data()[k];
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kGradCheckFloor});
        if (rel > r.max_rel_err) {
          r.max_rel_err = rel;
          r.worst_param = p.model.params[i].name;
        }
        ++r.checked;
      }
    }
    if (!kink) return r;
  }
  throw Error(ErrorCode::kNumerical, "gradcheck: no kink-free test point found");
}

}  // namespace pvae
