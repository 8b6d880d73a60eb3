#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/dsp.hpp"
#include "core/model.hpp"
#include "core/vloss.hpp"

namespace pvae {

// Aligned raw LPS frames [F, N] for the noisy, speech and noise streams plus
// per-stream normalization statistics from the same (training) frames.
struct FrameDataset {
  Framing framing;
  Eigen::MatrixXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd d;
  FeatureNorms norms;

  int size() const { return static_cast<int>(y.cols()); }
  int bins() const { return static_cast<int>(y.rows()); }

  // Normalized columns `indices`.
  TripletBatch batch(std::span<const int> indices) const;
  TripletBatch all() const;
};

// Population mean / std per bin; std is floored at kMinFeatureStd.
inline constexpr double kMinFeatureStd = 1e-3;
FeatureNorm compute_norm(const Eigen::MatrixXd& frames);

// Noise segment of length `len` for the i-th mixture: a window of `noise`
// at a deterministic offset, tiled when the noise is shorter than `len`.
Waveform noise_segment(const Waveform& noise, std::size_t len, std::size_t index);

// Mixture i pairs clean[i] with noise[i % n_noise] at
// snrs[(i / n_noise) % n_snr], so every noise sees every SNR.
std::vector<MixtureExample> make_mixtures(const std::vector<Waveform>& clean,
                                          const std::vector<Waveform>& noise,
                                          const std::vector<double>& snrs);

FrameDataset dataset_from_mixtures(const std::vector<MixtureExample>& mixtures,
                                   const Framing& framing = {});

FrameDataset build_dataset(const std::vector<Waveform>& clean, const std::vector<Waveform>& noise,
                           const std::vector<double>& snrs, const Framing& framing = {});

}  // namespace pvae
