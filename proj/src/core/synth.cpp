#include "core/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "core/error.hpp"

namespace pvae {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kBlock = 16;

void peak_normalize(std::vector<double>& s, double peak) {
  double m = 0.0;
  for (double v : s) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    for (double& v : s) v *= peak / m;
  }
}

std::size_t sample_count(double seconds) {
  require(seconds > 0.0 && std::isfinite(seconds), ErrorCode::kInvalidArgument,
          "duration must be positive");
  return static_cast<std::size_t>(std::llround(seconds * kSampleRate));
}

// Attack / release ramps of a syllable.
double envelope(std::size_t i, std::size_t len) {
  const double attack = 0.02 * kSampleRate;
  const double release = 0.04 * kSampleRate;
  double e = 1.0;
  if (i < attack) e = std::sin(0.5 * std::numbers::pi * i / attack);
  const double tail = static_cast<double>(len - i);
  if (tail < release) e = std::min(e, std::sin(0.5 * std::numbers::pi * tail / release));
  return e * e;
}

struct Formants {
  std::array<double, 3> freq;
  std::array<double, 3> gain;
};

Formants random_formants(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f1(300.0, 850.0), f2(900.0, 2300.0), f3(2400.0, 3300.0);
  std::uniform_real_distribution<double> g(0.4, 1.0);
  return {{f1(rng), f2(rng), f3(rng)}, {1.0, g(rng), 0.5 * g(rng)}};
}

double formant_gain(double f, const Formants& a, const Formants& b, double mix) {
  static constexpr std::array<double, 3> kBandwidth{90.0, 130.0, 180.0};
  double s = 0.03;
  for (int k = 0; k < 3; ++k) {
    const double fk = (1.0 - mix) * a.freq[k] + mix * b.freq[k];
    const double gk = (1.0 - mix) * a.gain[k] + mix * b.gain[k];
    const double u = (f - fk) / kBandwidth[k];
    s += gk * std::exp(-0.5 * u * u);
  }
  return s / (1.0 + f / 1500.0);
}

void voiced_syllable(std::mt19937_64& rng, double base_f0, double* out, std::size_t len) {
  std::uniform_real_distribution<double> spread(0.85, 1.2), glide(0.8, 1.25);
  const double f_start = base_f0 * spread(rng);
  const double f_end = f_start * glide(rng);
  const Formants a = random_formants(rng), b = random_formants(rng);
  const int max_harm = static_cast<int>(7000.0 / std::max(f_start, f_end));
  std::vector<double> phase(static_cast<std::size_t>(max_harm) + 1, 0.0);
  std::vector<double> amp(phase.size(), 0.0);
  std::uniform_real_distribution<double> ph(0.0, kTwoPi);
  for (double& p : phase) p = ph(rng);

  for (std::size_t i = 0; i < len; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(len);
    const double f0 = f_start * std::pow(f_end / f_start, frac);
    if (i % kBlock == 0) {
      for (int h = 1; h <= max_harm; ++h) amp[h] = formant_gain(h * f0, a, b, frac);
    }
    double v = 0.0;
    for (int h = 1; h <= max_harm; ++h) {
      phase[h] += kTwoPi * h * f0 / kSampleRate;
      if (phase[h] > kTwoPi) phase[h] -= kTwoPi * std::floor(phase[h] / kTwoPi);
      v += amp[h] * std::sin(phase[h]);
    }
    out[i] += envelope(i, len) * v;
  }
}

// Two-pole resonator driven by white noise.
void unvoiced_syllable(std::mt19937_64& rng, double* out, std::size_t len) {
  std::uniform_real_distribution<double> centre(3000.0, 6000.0);
  std::normal_distribution<double> white(0.0, 1.0);
  const double fc = centre(rng);
  const double r = 0.93;
  const double c1 = 2.0 * r * std::cos(kTwoPi * fc / kSampleRate);
  const double c2 = -r * r;
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double y = 0.08 * white(rng) + c1 * y1 + c2 * y2;
    y2 = y1;
    y1 = y;
    out[i] += envelope(i, len) * y;
  }
}

}  // namespace

const char* noise_kind_name(NoiseKind k) {
  return k == NoiseKind::kBabble ? "babble" : "tonal";
}

Waveform synth_speech(std::uint64_t seed, double seconds) {
  const std::size_t n = sample_count(seconds);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base_f0 = 90.0 + 130.0 * u(rng);

  Waveform w;
  w.samples.assign(n, 0.0);
  std::size_t t = static_cast<std::size_t>((0.05 + 0.1 * u(rng)) * kSampleRate);
  while (t < n) {
    const std::size_t len = std::min<std::size_t>(
        static_cast<std::size_t>((0.12 + 0.2 * u(rng)) * kSampleRate), n - t);
    if (u(rng) < 0.8) {
      voiced_syllable(rng, base_f0, w.samples.data() + t, len);
    } else {
      unvoiced_syllable(rng, w.samples.data() + t, len);
    }
    t += len;
    const double pause = u(rng) < 0.1 ? 0.3 + 0.3 * u(rng) : 0.04 + 0.14 * u(rng);
    t += static_cast<std::size_t>(pause * kSampleRate);
  }
  peak_normalize(w.samples, 0.5);
  return w;
}

Waveform synth_noise(NoiseKind kind, std::uint64_t seed, double seconds) {
  const std::size_t n = sample_count(seconds);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> white(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Waveform w;
  w.samples.assign(n, 0.0);

  if (kind == NoiseKind::kBabble) {
    // Tone frequencies are a property of the noise type, shared by every realization.
    std::mt19937_64 type_rng(0xBABB1Eu);
    std::uniform_real_distribution<double> freq(250.0, 1400.0), rate(0.3, 3.0);
    constexpr int kTones = 8;
    std::array<double, kTones> f{}, r{}, am_phase{}, phase{};
    for (int k = 0; k < kTones; ++k) {
      f[k] = freq(type_rng);
      r[k] = rate(type_rng);
    }
    for (int k = 0; k < kTones; ++k) {
      am_phase[k] = kTwoPi * u(rng);
      phase[k] = kTwoPi * u(rng);
    }
    double pink = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kSampleRate;
      double v = 0.0;
      for (int k = 0; k < kTones; ++k) {
        const double wobble = 1.0 + 0.03 * std::sin(kTwoPi * 0.7 * r[k] * t + am_phase[k]);
        phase[k] += kTwoPi * f[k] * wobble / kSampleRate;
        const double am = 0.5 * (1.0 + std::sin(kTwoPi * r[k] * t + am_phase[k]));
        v += am * std::sin(phase[k]);
      }
      pink = 0.98 * pink + 0.02 * white(rng);
      w.samples[i] = v + 4.0 * pink;
    }
  } else {
    constexpr std::array<double, 3> kTones{2600.0, 3800.0, 5200.0};
    std::array<double, 3> phase{};
    for (double& p : phase) p = kTwoPi * u(rng);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = white(rng);
      double v = 0.35 * (e - 0.9 * prev);
      prev = e;
      const double t = static_cast<double>(i) / kSampleRate;
      for (std::size_t k = 0; k < kTones.size(); ++k) v += 0.4 * std::sin(kTwoPi * kTones[k] * t + phase[k]);
      w.samples[i] = v;
    }
  }
  peak_normalize(w.samples, 0.5);
  return w;
}

}  // namespace pvae
