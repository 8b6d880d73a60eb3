#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "core/adam.hpp"
#include "core/dsp.hpp"
#include "core/model.hpp"
#include "core/vloss.hpp"

namespace pvae {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs_pretrain = 10;
  int epochs_joint = 10;
  int epochs_baseline = 10;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;
  // Joint stage only: keep the C-VAE / N-VAE sections fixed.
  bool freeze_pretrained = false;
  // Joint stage only: gradient treatment of the ratio terms.
  RatioGradient ratio_gradient = RatioGradient::kValueOnly;

  void validate() const;
  AdamConfig adam() const;
};

// Parameters of the built-in synthetic corpus generator.
struct SynthConfig {
  int utterances = 8;
  double utterance_seconds = 4.0;
  double noise_seconds = 30.0;
  std::string pairing = "cartesian";  // or round_robin
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  Framing framing;
  std::vector<double> snrs{-5.0, 0.0, 5.0, 10.0};
  SynthConfig synth;

  void validate() const;
};

// Flat `key = value` lines; '#' starts a comment. Unknown keys are errors.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

std::vector<std::string> config_keys();

}  // namespace pvae
