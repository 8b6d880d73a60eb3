#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace pvae {

inline constexpr int kSampleRate = 16000;
inline constexpr double kPowerFloor = 1e-10;
// Lower bound on the overlap-add normalization; only the outer edge samples
// (covered by a single frame) ever fall below it.
inline constexpr double kSynthesisNormFloor = 0.1;
inline constexpr double kMaxLogPower = 80.0;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

// Rejects a waveform that is not 16 kHz or carries non-finite samples.
void validate_pipeline_input(const Waveform& w);

enum class WindowId { kHannPeriodic = 0 };

struct Framing {
  int frame_len = 512;
  int hop = 256;
  WindowId window = WindowId::kHannPeriodic;

  int bins() const { return frame_len / 2 + 1; }
  bool operator==(const Framing&) const = default;
};

// F x N complex frames, one column per time frame.
struct Spectrogram {
  Framing framing;
  Eigen::MatrixXcd frames;
  int sample_rate = kSampleRate;

  int bins() const { return static_cast<int>(frames.rows()); }
  int num_frames() const { return static_cast<int>(frames.cols()); }
};

// Natural-log power, same layout as Spectrogram::frames.
struct LpsFeatures {
  Framing framing;
  Eigen::MatrixXd values;

  int bins() const { return static_cast<int>(values.rows()); }
  int num_frames() const { return static_cast<int>(values.cols()); }
};

struct Mask {
  Eigen::MatrixXd gains;
};

struct MixtureExample {
  Waveform y;
  Waveform x;
  Waveform d;  // already scaled by `gain`
  double snr_db = 0.0;
  double gain = 1.0;
};

std::vector<double> hann_window(int frame_len);

// 1 + floor((len - frame_len) / hop), or 0 when the signal is shorter than a frame.
int frame_count(std::size_t len, const Framing& framing);
std::size_t istft_length(const Framing& framing, int num_frames);

Spectrogram stft(const Waveform& w, int frame_len = 512, int hop = 256);
Waveform istft(const Spectrogram& s);

LpsFeatures lps(const Spectrogram& s);

// exp() of the log-power values. Values above kMaxLogPower are clamped first and
// counted in `clamped` when given.
Eigen::MatrixXd lps_to_power(const LpsFeatures& l, std::size_t* clamped = nullptr);

double mean_power(const std::vector<double>& samples);
MixtureExample mix_at_snr(const Waveform& x, const Waveform& d, double snr_db);

Mask compute_mask(const LpsFeatures& x_lps, const LpsFeatures& d_lps);
Spectrogram apply_mask(const Spectrogram& noisy, const Mask& m);

// Magnitude from the estimated LPS, phase from `noisy`.
Waveform reconstruct_direct(const LpsFeatures& est_lps, const Spectrogram& noisy);

}  // namespace pvae
