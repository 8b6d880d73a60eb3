#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/vloss.hpp"

namespace pvae {

enum class TrainStage : std::uint32_t { kPretrain = 1, kJoint = 2, kBaseline = 3 };

const char* train_stage_name(TrainStage s);

struct EpochLog {
  int epoch = 0;  // 1-based
  TrainStage stage = TrainStage::kPretrain;
  LossBreakdown losses;  // frame-weighted means over the epoch's batches
};

// `epoch=<k> stage=<s> total=<v> kl_s=<v> ... loss_n=<v>`
std::string format_log_line(const EpochLog& e);

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : Error(ErrorCode::kDiverged, what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

// Batch gradients are computed over fixed-size chunks whose sums are reduced
// in chunk order, so results do not depend on the worker count.
inline constexpr int kGradChunk = 64;

// Fresh init (seeded by cfg.seed), then C-VAE / N-VAE training on the speech
// and noise frames. NS-VAE parameters keep their initial values.
TrainResult pretrain_priors(const FrameDataset& data, const ModelConfig& model_cfg,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Joint training of all three autoencoders on the total loss. Requires a
// pretrained (or previously joint-trained) checkpoint.
TrainResult train_joint(const FrameDataset& data, const Checkpoint& ckpt, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

TrainResult train_baseline(const FrameDataset& data, const ModelConfig& model_cfg,
                           const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Fixed-eps loss evaluations on the frames `indices`, normalized with the
// model's stored norms.
LossBreakdown evaluate_total_loss(const PvaeModel& model, const FrameDataset& data,
                                  std::span<const int> indices, std::uint64_t eps_seed);
LossBreakdown evaluate_pretrain_loss(const PvaeModel& model, const FrameDataset& data,
                                     std::span<const int> indices, std::uint64_t eps_seed);
LossBreakdown evaluate_baseline_loss(const BaselineModel& model, const FrameDataset& data,
                                     std::span<const int> indices);

// Gradient of the batch-mean total loss (chunked as in training).
struct LossAndGrads {
  LossBreakdown loss;
  GradStore grads;
};
LossAndGrads total_loss_gradients(const PvaeModel& model, const TripletBatch& batch,
                                  const EpsDraws& eps);

}  // namespace pvae
