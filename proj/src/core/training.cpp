#include "core/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "core/parallel.hpp"

namespace pvae {
namespace {

TripletBatch make_batch(const FrameDataset& data, const FeatureNorms& norms,
                        std::span<const int> indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  TripletBatch b;
  b.y.resize(data.bins(), n);
  b.x.resize(data.bins(), n);
  b.d.resize(data.bins(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = indices[static_cast<std::size_t>(j)];
    require(i >= 0 && i < data.size(), ErrorCode::kInvalidArgument, "frame index out of range");
    b.y.col(j) = data.y.col(i);
    b.x.col(j) = data.x.col(i);
    b.d.col(j) = data.d.col(i);
  }
  b.y = norms.y.normalize(b.y);
  b.x = norms.x.normalize(b.x);
  b.d = norms.d.normalize(b.d);
  return b;
}

TripletBatch slice(const TripletBatch& b, Eigen::Index begin, Eigen::Index n) {
  return {b.y.middleCols(begin, n), b.x.middleCols(begin, n), b.d.middleCols(begin, n)};
}

EpsDraws slice(const EpsDraws& e, Eigen::Index begin, Eigen::Index n) {
  return {e.speech.middleCols(begin, n), e.noise.middleCols(begin, n),
          e.clean_speech.middleCols(begin, n), e.clean_noise.middleCols(begin, n)};
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& x, double w) {
  acc.kl_speech += w * x.kl_speech;
  acc.kl_noise += w * x.kl_noise;
  acc.ratio_speech += w * x.ratio_speech;
  acc.ratio_noise += w * x.ratio_noise;
  acc.nll_y += w * x.nll_y;
  acc.loss_c += w * x.loss_c;
  acc.loss_n += w * x.loss_n;
  acc.total += w * x.total;
}

struct ChunkResult {
  ad::Var objective;
  LossBreakdown parts;
};

// fn(tape, begin, count) records the chunk-mean loss on `tape`.
using ChunkFn = std::function<ChunkResult(ad::Tape&, Eigen::Index, Eigen::Index)>;

LossAndGrads chunked_gradients(const ParamStore& params, Eigen::Index batch, const ChunkFn& fn,
                               bool with_grads) {
  const auto chunk = static_cast<Eigen::Index>(kGradChunk);
  const std::size_t n_chunks = static_cast<std::size_t>((batch + chunk - 1) / chunk);
  std::vector<LossBreakdown> parts(n_chunks);
  std::vector<GradStore> grads(with_grads ? n_chunks : 0);
  parallel_for(n_chunks, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * chunk;
    const Eigen::Index count = std::min(chunk, batch - begin);
    const double w = static_cast<double>(count) / static_cast<double>(batch);
    ad::Tape tape(with_grads);
    ChunkResult r = fn(tape, begin, count);
    parts[c] = r.parts;
    if (with_grads) {
      tape.backward(tape.scale(r.objective, w));
      grads[c] = zero_grads(params);
      tape.accumulate_parameter_grads(grads[c]);
    }
  });
  LossAndGrads out;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const Eigen::Index count = std::min(chunk, batch - static_cast<Eigen::Index>(c) * chunk);
    add_scaled(out.loss, parts[c], static_cast<double>(count) / static_cast<double>(batch));
  }
  if (with_grads) {
    out.grads = std::move(grads[0]);
    for (std::size_t c = 1; c < n_chunks; ++c) {
      for (std::size_t k = 0; k < out.grads.size(); ++k) out.grads[k] += grads[c][k];
    }
  }
  return out;
}

LossAndGrads total_chunks(const PvaeModel& model, const TripletBatch& batch, const EpsDraws& eps,
                          bool with_grads, RatioGradient ratio_grad = RatioGradient::kFull) {
  return chunked_gradients(
      model.params, batch.size(),
      [&](ad::Tape& tape, Eigen::Index b, Eigen::Index n) -> ChunkResult {
        auto t = losses::total_loss(tape, model, slice(batch, b, n), slice(eps, b, n),
                                    ratio_grad);
        return {t.total, breakdown(t)};
      },
      with_grads);
}

LossAndGrads pretrain_chunks(const PvaeModel& model, const TripletBatch& batch,
                             const EpsDraws& eps, bool with_grads) {
  return chunked_gradients(
      model.params, batch.size(),
      [&](ad::Tape& tape, Eigen::Index b, Eigen::Index n) -> ChunkResult {
        const EpsDraws e = slice(eps, b, n);
        auto t = losses::pretrain_loss(tape, model, batch.x.middleCols(b, n),
                                       batch.d.middleCols(b, n), e);
        LossBreakdown parts;
        parts.loss_c = t.clean.total.scalar();
        parts.loss_n = t.noise.total.scalar();
        parts.total = t.total.scalar();
        return {t.total, parts};
      },
      with_grads);
}

LossAndGrads baseline_chunks(const BaselineModel& model, const TripletBatch& batch,
                             bool with_grads) {
  return chunked_gradients(
      model.params, batch.size(),
      [&](ad::Tape& tape, Eigen::Index b, Eigen::Index n) -> ChunkResult {
        auto t = losses::baseline_loss(tape, model, slice(batch, b, n));
        LossBreakdown parts;
        parts.loss_c = t.speech.scalar();
        parts.loss_n = t.noise.scalar();
        parts.total = t.total.scalar();
        return {t.total, parts};
      },
      with_grads);
}

std::mt19937_64 epoch_rng(std::uint64_t seed, TrainStage stage, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

struct StageRun {
  TrainStage stage;
  int epochs;
  ParamStore* params;
  AdamState* adam;
  std::vector<std::size_t> trainable;
  std::function<LossAndGrads(const TripletBatch&, std::mt19937_64&)> step;
  std::function<Checkpoint()> snapshot;
};

std::vector<EpochLog> run_epochs(const FrameDataset& data, const FeatureNorms& norms,
                                 const TrainConfig& cfg, const StageRun& run,
                                 const EpochCallback& on_epoch) {
  const AdamConfig adam_cfg = cfg.adam();
  std::vector<EpochLog> log;
  Checkpoint last_good = run.snapshot();
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  const char* name = train_stage_name(run.stage);

  for (int epoch = 1; epoch <= run.epochs; ++epoch) {
    std::mt19937_64 rng = epoch_rng(cfg.seed, run.stage, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown sum;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const TripletBatch batch =
          make_batch(data, norms, std::span<const int>(order.data() + start, n));
      LossAndGrads lg = run.step(batch, rng);
      if (!lg.loss.finite()) {
        throw TrainingDiverged(std::string("training diverged: non-finite loss in stage ") + name +
                                   " epoch " + std::to_string(epoch),
                               std::move(last_good));
      }
      try {
        adam_step(*run.params, lg.grads, *run.adam, adam_cfg, run.trainable);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumerical) throw;
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), std::move(last_good));
      }
      add_scaled(sum, lg.loss, static_cast<double>(n));
    }
    if (!run.params->all_finite()) {
      throw TrainingDiverged("training diverged: non-finite parameters", std::move(last_good));
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.stage = run.stage;
    add_scaled(entry.losses, sum, 1.0 / static_cast<double>(data.size()));
    log.push_back(entry);
    last_good = run.snapshot();
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

std::vector<std::size_t> sections(const ParamStore& params, std::initializer_list<const char*> ps) {
  std::vector<std::size_t> out;
  for (const char* p : ps) {
    auto s = params.section(p);
    out.insert(out.end(), s.begin(), s.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void require_data(const FrameDataset& data, const ModelConfig& cfg) {
  require(data.size() > 0, ErrorCode::kEmptyCorpus, "empty corpus");
  require(data.bins() == cfg.freq_bins, ErrorCode::kShape,
          "shape error: dataset bins do not match freq_bins");
}

}  // namespace

const char* train_stage_name(TrainStage s) {
  switch (s) {
    case TrainStage::kPretrain: return "pretrain";
    case TrainStage::kJoint: return "joint";
    case TrainStage::kBaseline: return "baseline";
  }
  return "unknown";
}

std::string format_log_line(const EpochLog& e) {
  const auto& l = e.losses;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epoch=%d stage=%s total=%.9g kl_s=%.9g kl_n=%.9g ratio_s=%.9g ratio_n=%.9g "
                "nll_y=%.9g loss_c=%.9g loss_n=%.9g",
                e.epoch, train_stage_name(e.stage), l.total, l.kl_speech, l.kl_noise,
                l.ratio_speech, l.ratio_noise, l.nll_y, l.loss_c, l.loss_n);
  return buf;
}

LossAndGrads total_loss_gradients(const PvaeModel& model, const TripletBatch& batch,
                                  const EpsDraws& eps) {
  return total_chunks(model, batch, eps, true);
}

TrainResult pretrain_priors(const FrameDataset& data, const ModelConfig& model_cfg,
                            const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require_data(data, model_cfg);
  ModelConfig mc = model_cfg;
  mc.feature_norm = rounded_norms(data.norms);
  PvaeModel model = init_params(mc, cfg.seed);
  AdamState adam = make_adam_state(model.params);

  StageRun run;
  run.stage = TrainStage::kPretrain;
  run.epochs = cfg.epochs_pretrain;
  run.params = &model.params;
  run.adam = &adam;
  run.trainable = sections(model.params, {kSectionThetaX, kSectionPhiX, kSectionThetaD, kSectionPhiD});
  run.step = [&](const TripletBatch& b, std::mt19937_64& rng) {
    return pretrain_chunks(model, b, draw_eps(rng, model.config, b.size()), true);
  };
  run.snapshot = [&] { return make_checkpoint(model, adam, Stage::kPretrained, data.framing); };

  TrainResult r;
  r.log = run_epochs(data, model.config.feature_norm, cfg, run, on_epoch);
  r.checkpoint = run.snapshot();
  return r;
}

TrainResult train_joint(const FrameDataset& data, const Checkpoint& ckpt, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  require(ckpt.stage == Stage::kPretrained || ckpt.stage == Stage::kJoint, ErrorCode::kStage,
          "model not pretrained");
  PvaeModel model = model_from_checkpoint(ckpt);
  require_data(data, model.config);
  require(data.framing == ckpt.framing, ErrorCode::kIncompatible,
          "incompatible checkpoint: framing differs from the corpus");
  AdamState adam = ckpt.optimizer.slots.empty() ? make_adam_state(model.params) : ckpt.optimizer;

  StageRun run;
  run.stage = TrainStage::kJoint;
  run.epochs = cfg.epochs_joint;
  run.params = &model.params;
  run.adam = &adam;
  run.trainable = cfg.freeze_pretrained ? sections(model.params, {kSectionThetaY, kSectionPhiY})
                                        : all_indices(model.params);
  run.step = [&](const TripletBatch& b, std::mt19937_64& rng) {
    return total_chunks(model, b, draw_eps(rng, model.config, b.size()), true, cfg.ratio_gradient);
  };
  run.snapshot = [&] { return make_checkpoint(model, adam, Stage::kJoint, ckpt.framing); };

  TrainResult r;
  r.log = run_epochs(data, model.config.feature_norm, cfg, run, on_epoch);
  r.checkpoint = run.snapshot();
  return r;
}

TrainResult train_baseline(const FrameDataset& data, const ModelConfig& model_cfg,
                           const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require_data(data, model_cfg);
  ModelConfig mc = model_cfg;
  mc.feature_norm = rounded_norms(data.norms);
  BaselineModel model = init_baseline(mc, cfg.seed);
  AdamState adam = make_adam_state(model.params);

  StageRun run;
  run.stage = TrainStage::kBaseline;
  run.epochs = cfg.epochs_baseline;
  run.params = &model.params;
  run.adam = &adam;
  run.trainable = all_indices(model.params);
  run.step = [&](const TripletBatch& b, std::mt19937_64&) { return baseline_chunks(model, b, true); };
  run.snapshot = [&] { return make_baseline_checkpoint(model, adam, data.framing); };

  TrainResult r;
  r.log = run_epochs(data, model.config.feature_norm, cfg, run, on_epoch);
  r.checkpoint = run.snapshot();
  return r;
}

LossBreakdown evaluate_total_loss(const PvaeModel& model, const FrameDataset& data,
                                  std::span<const int> indices, std::uint64_t eps_seed) {
  const TripletBatch b = make_batch(data, model.config.feature_norm, indices);
  std::mt19937_64 rng(eps_seed);
  return total_chunks(model, b, draw_eps(rng, model.config, b.size()), false).loss;
}

LossBreakdown evaluate_pretrain_loss(const PvaeModel& model, const FrameDataset& data,
                                     std::span<const int> indices, std::uint64_t eps_seed) {
  const TripletBatch b = make_batch(data, model.config.feature_norm, indices);
  std::mt19937_64 rng(eps_seed);
  return pretrain_chunks(model, b, draw_eps(rng, model.config, b.size()), false).loss;
}

LossBreakdown evaluate_baseline_loss(const BaselineModel& model, const FrameDataset& data,
                                     std::span<const int> indices) {
  return baseline_chunks(model, make_batch(data, model.config.feature_norm, indices), false).loss;
}

}  // namespace pvae
