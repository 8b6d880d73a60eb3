#include "core/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "core/error.hpp"

namespace pvae {
namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    require(plan_ != nullptr, ErrorCode::kInvalidArgument, "fft planning failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

void check_framing(const Framing& f) {
  require(f.frame_len >= 2 && f.frame_len % 2 == 0, ErrorCode::kInvalidArgument,
          "frame length must be even");
  require(f.hop > 0 && f.hop <= f.frame_len, ErrorCode::kInvalidArgument,
          "hop must be in (0, frame_len]");
}

void check_same_shape(Eigen::Index r0, Eigen::Index c0, Eigen::Index r1, Eigen::Index c1) {
  require(r0 == r1 && c0 == c1, ErrorCode::kShape, "shape error");
}

}  // namespace

void validate_pipeline_input(const Waveform& w) {
  require(w.sample_rate == kSampleRate, ErrorCode::kInvalidAudio,
          "invalid audio: sample rate must be 16000 Hz");
  for (double s : w.samples) {
    require(std::isfinite(s), ErrorCode::kInvalidAudio, "invalid audio");
  }
}

std::vector<double> hann_window(int frame_len) {
  std::vector<double> w(static_cast<std::size_t>(frame_len));
  for (int k = 0; k < frame_len; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / frame_len);
  }
  return w;
}

int frame_count(std::size_t len, const Framing& framing) {
  if (len < static_cast<std::size_t>(framing.frame_len)) return 0;
  return 1 + static_cast<int>((len - framing.frame_len) / framing.hop);
}

std::size_t istft_length(const Framing& framing, int num_frames) {
  if (num_frames <= 0) return 0;
  return static_cast<std::size_t>(framing.frame_len) +
         static_cast<std::size_t>(num_frames - 1) * framing.hop;
}

Spectrogram stft(const Waveform& w, int frame_len, int hop) {
  Framing framing{frame_len, hop, WindowId::kHannPeriodic};
  check_framing(framing);
  require(w.size() >= static_cast<std::size_t>(frame_len), ErrorCode::kInvalidAudio,
          "input too short");
  for (double s : w.samples) {
    require(std::isfinite(s), ErrorCode::kInvalidAudio, "invalid audio");
  }

  const int n_frames = frame_count(w.size(), framing);
  const int bins = framing.bins();
  const auto window = hann_window(frame_len);

  FftwBuffer in(sizeof(double) * frame_len * n_frames);
  FftwBuffer out(sizeof(fftw_complex) * bins * n_frames);
  auto* real = static_cast<double*>(in.ptr);
  for (int n = 0; n < n_frames; ++n) {
    const double* src = w.samples.data() + static_cast<std::size_t>(n) * hop;
    double* dst = real + static_cast<std::size_t>(n) * frame_len;
    for (int k = 0; k < frame_len; ++k) dst[k] = src[k] * window[k];
  }

  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex());
    raw = fftw_plan_many_dft_r2c(1, &frame_len, n_frames, real, nullptr, 1, frame_len,
                                 static_cast<fftw_complex*>(out.ptr), nullptr, 1, bins,
                                 FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();

  Spectrogram s;
  s.framing = framing;
  s.sample_rate = w.sample_rate;
  s.frames.resize(bins, n_frames);
  const auto* c = static_cast<const fftw_complex*>(out.ptr);
  for (int n = 0; n < n_frames; ++n) {
    for (int f = 0; f < bins; ++f) {
      const auto& v = c[static_cast<std::size_t>(n) * bins + f];
      s.frames(f, n) = {v[0], v[1]};
    }
  }
  return s;
}

Waveform istft(const Spectrogram& s) {
  const Framing& framing = s.framing;
  check_framing(framing);
  const int frame_len = framing.frame_len;
  const int bins = framing.bins();
  require(s.frames.rows() == bins, ErrorCode::kShape, "shape error");
  const int n_frames = s.num_frames();

  Waveform out;
  out.sample_rate = s.sample_rate;
  if (n_frames == 0) return out;

  const auto window = hann_window(frame_len);
  const std::size_t len = istft_length(framing, n_frames);

  FftwBuffer in(sizeof(fftw_complex) * bins * n_frames);
  FftwBuffer time(sizeof(double) * frame_len * n_frames);
  auto* c = static_cast<fftw_complex*>(in.ptr);
  for (int n = 0; n < n_frames; ++n) {
    for (int f = 0; f < bins; ++f) {
      const auto v = s.frames(f, n);
      require(std::isfinite(v.real()) && std::isfinite(v.imag()), ErrorCode::kInvalidArgument,
              "non-finite spectrogram");
      c[static_cast<std::size_t>(n) * bins + f][0] = v.real();
      c[static_cast<std::size_t>(n) * bins + f][1] = v.imag();
    }
  }

  fftw_plan raw;
  {
    std::lock_guard lock(planner_mutex());
    raw = fftw_plan_many_dft_c2r(1, &frame_len, n_frames, c, nullptr, 1, bins,
                                 static_cast<double*>(time.ptr), nullptr, 1, frame_len,
                                 FFTW_ESTIMATE);
  }
  Plan plan(raw);
  plan.execute();

  std::vector<double> acc(len, 0.0);
  std::vector<double> norm(len, 0.0);
  const auto* t = static_cast<const double*>(time.ptr);
  const double scale = 1.0 / frame_len;
  for (int n = 0; n < n_frames; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * framing.hop;
    const double* frame = t + static_cast<std::size_t>(n) * frame_len;
    for (int k = 0; k < frame_len; ++k) {
      acc[base + k] += window[k] * frame[k] * scale;
      norm[base + k] += window[k] * window[k];
    }
  }

  // The periodic Hann window is exactly zero at its first tap, so sample 0
  // never carries energy; any other zero means the hop leaves a gap.
  out.samples.assign(len, 0.0);
  for (std::size_t i = 1; i < len; ++i) {
    require(norm[i] > 0.0, ErrorCode::kInvalidArgument, "non-invertible framing");
    out.samples[i] = acc[i] / std::max(norm[i], kSynthesisNormFloor);
  }
  return out;
}

LpsFeatures lps(const Spectrogram& s) {
  LpsFeatures l;
  l.framing = s.framing;
  l.values = s.frames.cwiseAbs2().cwiseMax(kPowerFloor).array().log().matrix();
  return l;
}

Eigen::MatrixXd lps_to_power(const LpsFeatures& l, std::size_t* clamped) {
  Eigen::MatrixXd p(l.values.rows(), l.values.cols());
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < l.values.size(); ++i) {
    double v = l.values.data()[i];
    if (v > kMaxLogPower) {
      v = kMaxLogPower;
      ++count;
    }
    p.data()[i] = std::exp(v);
  }
  if (clamped != nullptr) *clamped += count;
  return p;
}

double mean_power(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

MixtureExample mix_at_snr(const Waveform& x, const Waveform& d, double snr_db) {
  require(x.size() == d.size() && x.sample_rate == d.sample_rate, ErrorCode::kShape,
          "mixing inputs must have equal length and rate");
  require(std::isfinite(snr_db), ErrorCode::kInvalidArgument, "snr must be finite");
  const double px = mean_power(x.samples);
  const double pd = mean_power(d.samples);
  require(px > 0.0 && pd > 0.0 && std::isfinite(px) && std::isfinite(pd),
          ErrorCode::kInvalidArgument, "degenerate mixing input");

  MixtureExample ex;
  ex.snr_db = snr_db;
  ex.gain = std::sqrt(px / (pd * std::pow(10.0, snr_db / 10.0)));
  ex.x = x;
  ex.d.sample_rate = d.sample_rate;
  ex.d.samples.resize(d.size());
  ex.y.sample_rate = x.sample_rate;
  ex.y.samples.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ex.d.samples[i] = ex.gain * d.samples[i];
    ex.y.samples[i] = x.samples[i] + ex.d.samples[i];
  }
  return ex;
}

Mask compute_mask(const LpsFeatures& x_lps, const LpsFeatures& d_lps) {
  check_same_shape(x_lps.values.rows(), x_lps.values.cols(), d_lps.values.rows(),
                   d_lps.values.cols());
  const Eigen::ArrayXXd px = lps_to_power(x_lps).array().max(kPowerFloor);
  const Eigen::ArrayXXd pd = lps_to_power(d_lps).array().max(kPowerFloor);
  Mask m;
  m.gains = (px / (px + pd)).matrix();
  return m;
}

Spectrogram apply_mask(const Spectrogram& noisy, const Mask& m) {
  check_same_shape(noisy.frames.rows(), noisy.frames.cols(), m.gains.rows(), m.gains.cols());
  Spectrogram out = noisy;
  out.frames = noisy.frames.cwiseProduct(m.gains.cast<std::complex<double>>());
  return out;
}

Waveform reconstruct_direct(const LpsFeatures& est_lps, const Spectrogram& noisy) {
  check_same_shape(est_lps.values.rows(), est_lps.values.cols(), noisy.frames.rows(),
                   noisy.frames.cols());
  const Eigen::MatrixXd magnitude = lps_to_power(est_lps).cwiseSqrt();
  Spectrogram s = noisy;
  for (Eigen::Index n = 0; n < s.frames.cols(); ++n) {
    for (Eigen::Index f = 0; f < s.frames.rows(); ++f) {
      const double phase = std::arg(noisy.frames(f, n));
      s.frames(f, n) = std::polar(magnitude(f, n), phase);
    }
  }
  return istft(s);
}

}  // namespace pvae
