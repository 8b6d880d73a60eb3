#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "core/baseline.hpp"
#include "core/checkpoint.hpp"
#include "core/dsp.hpp"
#include "core/model.hpp"

namespace pvae {

enum class EnhanceMode { kPvaeL, kPvaeM, kYL, kYM, kPassthrough };

EnhanceMode parse_enhance_mode(const std::string& s);
const char* enhance_mode_name(EnhanceMode m);

struct EnhanceOptions {
  // 0: posterior means. k > 0: average of k decoded LPS frames from
  // reparameterized latent draws, seeded by `seed`.
  int samples = 0;
  std::uint64_t seed = 0;
  Framing framing;
};

// Denormalized speech / noise LPS [F, N] decoded from the noisy LPS.
struct LpsEstimates {
  Eigen::MatrixXd speech;
  Eigen::MatrixXd noise;
};

LpsEstimates pvae_estimates(const PvaeModel& model, const LpsFeatures& noisy,
                            const EnhanceOptions& opts = {});
LpsEstimates baseline_estimates(const BaselineModel& model, const LpsFeatures& noisy);

struct EnhanceResult {
  Waveform audio;
  LpsEstimates estimates;
  std::optional<Mask> mask;
};

// PVAE-L: speech branch latent -> C-VAE decoder -> noisy-phase reconstruction.
EnhanceResult enhance_direct(const Waveform& noisy, const PvaeModel& model,
                             const EnhanceOptions& opts = {});
// PVAE-M: speech and noise decodes -> Wiener mask on the noisy STFT.
EnhanceResult enhance_mask(const Waveform& noisy, const PvaeModel& model,
                           const EnhanceOptions& opts = {});
EnhanceResult enhance_baseline_direct(const Waveform& noisy, const BaselineModel& model,
                                      const Framing& framing = {});
EnhanceResult enhance_baseline_mask(const Waveform& noisy, const BaselineModel& model,
                                    const Framing& framing = {});

// Mask-path synthesis from given LPS estimates (also used with oracle LPS).
EnhanceResult mask_from_estimates(const Spectrogram& noisy, LpsEstimates est);

struct SwapResult {
  Waveform audio;
  LpsFeatures lps_a;
  LpsFeatures lps_b;
  LpsFeatures modified;
};

// Speech latent of A, noise latent of B, NS-VAE decoder, phase of A.
SwapResult latent_swap(const Waveform& a, const Waveform& b, const PvaeModel& model,
                       const Framing& framing = {});

// NS-VAE decode of the posterior means of y's own latents (denormalized).
LpsFeatures nsvae_reconstruct(const Waveform& y, const PvaeModel& model,
                              const Framing& framing = {});

// Loads whatever model `mode` needs from the checkpoint and checks the stage.
class Enhancer {
 public:
  Enhancer(EnhanceMode mode, const Checkpoint& ckpt, EnhanceOptions opts = {});
  explicit Enhancer(EnhanceMode mode);  // passthrough only

  EnhanceMode mode() const { return mode_; }
  Waveform operator()(const Waveform& noisy) const;

 private:
  EnhanceMode mode_;
  EnhanceOptions opts_;
  std::optional<PvaeModel> pvae_;
  std::optional<BaselineModel> baseline_;
};

}  // namespace pvae
