#include "pvae/pvae.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/dataset.hpp"
#include "core/enhance.hpp"
#include "core/error.hpp"
#include "core/gradcheck.hpp"
#include "core/grid.hpp"
#include "core/metrics.hpp"
#include "core/synth.hpp"
#include "core/training.hpp"
#include "core/wav.hpp"

struct pvae_config {
  pvae::RunConfig run;
};

struct pvae_checkpoint {
  pvae::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

pvae_status to_status(pvae::ErrorCode c) { return static_cast<pvae_status>(static_cast<int>(c)); }

template <class Fn>
pvae_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PVAE_OK;
  } catch (const pvae::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return PVAE_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  pvae::require(p != nullptr, pvae::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

pvae::EpochCallback log_adapter(pvae_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const pvae::EpochLog& e) { log(pvae::format_log_line(e).c_str(), user); };
}

pvae::FrameDataset load_dataset(const char* corpus_dir, const pvae::RunConfig& run) {
  auto items = pvae::load_corpus(corpus_dir);
  std::vector<pvae::MixtureExample> mixtures;
  mixtures.reserve(items.size());
  for (auto& it : items) mixtures.push_back(std::move(it.mixture));
  return pvae::dataset_from_mixtures(mixtures, run.framing);
}

pvae::Checkpoint load_required(const char* path) {
  pvae::require(path != nullptr && *path != '\0', pvae::ErrorCode::kNotFound,
                "checkpoint not found");
  return pvae::load_checkpoint(path);
}

// Saves the last good checkpoint next to the requested output, then rethrows.
template <class Fn>
pvae::TrainResult train_or_keep(const char* out_ckpt, Fn&& fn) {
  try {
    return fn();
  } catch (const pvae::TrainingDiverged& e) {
    pvae::save_checkpoint(std::string(out_ckpt) + ".last_good", e.last_good());
    throw;
  }
}

pvae::Enhancer make_enhancer(const char* ckpt_path, const std::string& mode_name,
                             pvae::EnhanceOptions opts) {
  const pvae::EnhanceMode mode = pvae::parse_enhance_mode(mode_name);
  if (mode == pvae::EnhanceMode::kPassthrough) return pvae::Enhancer(mode);
  return pvae::Enhancer(mode, load_required(ckpt_path), opts);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  pvae::require(f != nullptr, pvae::ErrorCode::kIo, "cannot write " + path.string());
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  const bool closed = std::fclose(f) == 0;
  pvae::require(ok && closed, pvae::ErrorCode::kIo, "cannot write " + path.string());
  std::filesystem::rename(tmp, path);
}

void synth_corpus(const pvae::RunConfig& run, const std::vector<pvae::NamedWave>& clean,
                  const std::vector<pvae::NamedWave>& noise, const char* out_dir,
                  size_t* rows_out) {
  need(out_dir, "out_dir");
  auto rows = pvae::write_corpus(out_dir, clean, noise, run.snrs,
                                 pvae::parse_pairing(run.synth.pairing));
  if (rows_out) *rows_out = rows.size();
}

}  // namespace

extern "C" {

const char* pvae_version(void) { return "0.1.0"; }

const char* pvae_last_error(void) { return g_last_error.c_str(); }

const char* pvae_status_name(pvae_status status) {
  if (status == PVAE_OK) return "ok";
  if (status == PVAE_ERR_INTERNAL) return "internal";
  return pvae::error_code_name(static_cast<pvae::ErrorCode>(status));
}

void pvae_string_free(char* s) { std::free(s); }

pvae_status pvae_config_create(pvae_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pvae_config();
  });
}

void pvae_config_free(pvae_config* cfg) { delete cfg; }

pvae_status pvae_config_set(pvae_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    pvae::set_config_value(cfg->run, key, value);
  });
}

pvae_status pvae_config_load_file(pvae_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    cfg->run = pvae::load_config_file(path, cfg->run);
  });
}

pvae_status pvae_checkpoint_load(const char* path, pvae_checkpoint** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pvae_checkpoint{load_required(path)};
  });
}

pvae_status pvae_checkpoint_save(const pvae_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    need(ckpt, "checkpoint");
    need(path, "path");
    pvae::save_checkpoint(path, ckpt->ckpt);
  });
}

void pvae_checkpoint_free(pvae_checkpoint* ckpt) { delete ckpt; }

pvae_status pvae_checkpoint_stage(const pvae_checkpoint* ckpt, pvae_stage* out) {
  return guarded([&] {
    need(ckpt, "checkpoint");
    need(out, "out");
    *out = static_cast<pvae_stage>(static_cast<int>(ckpt->ckpt.stage));
  });
}

pvae_status pvae_synth_generate(const pvae_config* cfg, const char* out_dir, size_t* rows_out) {
  return guarded([&] {
    need(cfg, "config");
    const pvae::RunConfig& run = cfg->run;
    run.validate();
    const std::uint64_t seed = run.train.seed;
    std::vector<pvae::NamedWave> clean;
    for (int i = 0; i < run.synth.utterances; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "utt%03d", i);
      clean.push_back({name, pvae::synth_speech(seed * 1000003ULL + static_cast<std::uint64_t>(i),
                                                run.synth.utterance_seconds)});
    }
    std::vector<pvae::NamedWave> noise;
    for (auto kind : {pvae::NoiseKind::kBabble, pvae::NoiseKind::kTonal}) {
      noise.push_back({pvae::noise_kind_name(kind),
                       pvae::synth_noise(kind, seed * 7919ULL + static_cast<std::uint64_t>(kind) + 1,
                                         run.synth.noise_seconds)});
    }
    synth_corpus(run, clean, noise, out_dir, rows_out);
  });
}

pvae_status pvae_synth_dirs(const pvae_config* cfg, const char* clean_dir, const char* noise_dir,
                            const char* out_dir, size_t* rows_out) {
  return guarded([&] {
    need(cfg, "config");
    need(clean_dir, "clean_dir");
    need(noise_dir, "noise_dir");
    cfg->run.validate();
    synth_corpus(cfg->run, pvae::read_wav_dir(clean_dir), pvae::read_wav_dir(noise_dir), out_dir,
                 rows_out);
  });
}

pvae_status pvae_pretrain(const pvae_config* cfg, const char* corpus_dir, const char* out_ckpt,
                          pvae_log_fn log, void* user) {
  return guarded([&] {
    need(cfg, "config");
    need(corpus_dir, "corpus_dir");
    need(out_ckpt, "out_ckpt");
    cfg->run.validate();
    const auto data = load_dataset(corpus_dir, cfg->run);
    auto r = train_or_keep(out_ckpt, [&] {
      return pvae::pretrain_priors(data, cfg->run.model, cfg->run.train, log_adapter(log, user));
    });
    pvae::save_checkpoint(out_ckpt, r.checkpoint);
  });
}

pvae_status pvae_train(const pvae_config* cfg, const char* corpus_dir, const char* in_ckpt,
                       const char* out_ckpt, pvae_log_fn log, void* user) {
  return guarded([&] {
    need(cfg, "config");
    need(corpus_dir, "corpus_dir");
    need(out_ckpt, "out_ckpt");
    cfg->run.validate();
    pvae::require(in_ckpt != nullptr, pvae::ErrorCode::kStage, "model not pretrained");
    const pvae::Checkpoint start = pvae::load_checkpoint(in_ckpt);
    const auto data = load_dataset(corpus_dir, cfg->run);
    auto r = train_or_keep(out_ckpt, [&] {
      return pvae::train_joint(data, start, cfg->run.train, log_adapter(log, user));
    });
    pvae::save_checkpoint(out_ckpt, r.checkpoint);
  });
}

pvae_status pvae_train_baseline(const pvae_config* cfg, const char* corpus_dir,
                                const char* out_ckpt, pvae_log_fn log, void* user) {
  return guarded([&] {
    need(cfg, "config");
    need(corpus_dir, "corpus_dir");
    need(out_ckpt, "out_ckpt");
    cfg->run.validate();
    const auto data = load_dataset(corpus_dir, cfg->run);
    auto r = train_or_keep(out_ckpt, [&] {
      return pvae::train_baseline(data, cfg->run.model, cfg->run.train, log_adapter(log, user));
    });
    pvae::save_checkpoint(out_ckpt, r.checkpoint);
  });
}

pvae_status pvae_enhance_file(const char* ckpt_path, const char* mode, const char* in_wav,
                              const char* out_wav, int samples, uint64_t seed, const char* ref_wav,
                              double* si_sdr_out) {
  return guarded([&] {
    need(mode, "mode");
    need(in_wav, "in_wav");
    need(out_wav, "out_wav");
    pvae::require(samples >= 0, pvae::ErrorCode::kInvalidArgument, "samples must be >= 0");
    pvae::EnhanceOptions opts;
    opts.samples = samples;
    opts.seed = seed;
    const pvae::Enhancer enh = make_enhancer(ckpt_path, mode, opts);
    const pvae::Waveform noisy = pvae::read_wav(in_wav);
    const pvae::Waveform out = enh(noisy);
    pvae::write_wav(out_wav, out);
    if (ref_wav) {
      need(si_sdr_out, "si_sdr_out");
      const pvae::Waveform ref = pvae::read_wav(ref_wav);
      const std::size_t n = std::min(out.size(), ref.size());
      std::vector<double> e(out.samples.begin(), out.samples.begin() + static_cast<long>(n));
      std::vector<double> r(ref.samples.begin(), ref.samples.begin() + static_cast<long>(n));
      *si_sdr_out = pvae::si_sdr(e, r);
    }
  });
}

pvae_status pvae_swap_files(const char* ckpt_path, const char* a_wav, const char* b_wav,
                            const char* out_prefix) {
  return guarded([&] {
    need(a_wav, "a_wav");
    need(b_wav, "b_wav");
    need(out_prefix, "out_prefix");
    const pvae::Checkpoint ckpt = load_required(ckpt_path);
    pvae::require(ckpt.stage == pvae::Stage::kJoint, pvae::ErrorCode::kStage,
                  "model not jointly trained");
    const pvae::PvaeModel model = pvae::model_from_checkpoint(ckpt);
    const pvae::Waveform a = pvae::read_wav(a_wav);
    const pvae::Waveform b = pvae::read_wav(b_wav);
    const auto swap = pvae::latent_swap(a, b, model, ckpt.framing);
    const auto recon = pvae::nsvae_reconstruct(a, model, ckpt.framing);
    const std::string p(out_prefix);
    pvae::write_wav(p + "_modified.wav", swap.audio);
    pvae::write_lps_grid(p + "_a.lpsgrid", swap.lps_a.values);
    pvae::write_lps_grid(p + "_b.lpsgrid", swap.lps_b.values);
    pvae::write_lps_grid(p + "_modified.lpsgrid", swap.modified.values);
    pvae::write_lps_grid(p + "_recon_a.lpsgrid", recon.values);
  });
}

pvae_status pvae_eval(const char* corpus_dir, const char* ckpt_path, const char* mode,
                      const char* out_path, char** report_out) {
  return guarded([&] {
    need(corpus_dir, "corpus_dir");
    need(mode, "mode");
    const pvae::Enhancer enh = make_enhancer(ckpt_path, mode, {});
    auto items = pvae::load_corpus(corpus_dir);
    std::vector<pvae::MixtureExample> corpus;
    corpus.reserve(items.size());
    for (auto& it : items) corpus.push_back(std::move(it.mixture));
    const auto report = pvae::evaluate_corpus([&](const pvae::Waveform& w) { return enh(w); }, corpus);
    const std::string text = pvae::format_report(report);
    if (out_path) write_text_atomic(out_path, text);
    if (report_out) *report_out = dup_string(text);
  });
}

pvae_status pvae_gradcheck(uint64_t seed, double* max_rel_err, size_t* n_checked) {
  return guarded([&] {
    need(max_rel_err, "max_rel_err");
    const auto r = pvae::gradcheck_total_loss(seed);
    *max_rel_err = r.max_rel_err;
    if (n_checked) *n_checked = r.checked;
  });
}

pvae_status pvae_si_sdr(const double* est, const double* ref, size_t n, double* out) {
  return guarded([&] {
    need(est, "est");
    need(ref, "ref");
    need(out, "out");
    *out = pvae::si_sdr(std::vector<double>(est, est + n), std::vector<double>(ref, ref + n));
  });
}

}  // extern "C"
