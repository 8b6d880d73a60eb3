/*
 * pvae: speech enhancement with disentangled speech / noise latent variables.
 *
 * All functions return a pvae_status. On failure, pvae_last_error() holds a
 * one-line description for the calling thread until its next pvae call.
 * Handles are opaque; free them with the matching *_free function.
 */
#ifndef PVAE_PVAE_H
#define PVAE_PVAE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PVAE_API __declspec(dllexport)
#else
#define PVAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pvae_status {
  PVAE_OK = 0,
  PVAE_ERR_INVALID_ARGUMENT = 1,
  PVAE_ERR_INVALID_AUDIO = 2,
  PVAE_ERR_SHAPE = 3,
  PVAE_ERR_IO = 4,
  PVAE_ERR_NOT_FOUND = 5,
  PVAE_ERR_FORMAT = 6,
  PVAE_ERR_CORRUPT = 7,
  PVAE_ERR_INCOMPATIBLE = 8,
  PVAE_ERR_STAGE = 9,
  PVAE_ERR_NUMERICAL = 10,
  PVAE_ERR_DIVERGED = 11,
  PVAE_ERR_EMPTY_CORPUS = 12,
  PVAE_ERR_INTERNAL = 99
} pvae_status;

typedef enum pvae_stage {
  PVAE_STAGE_INIT = 0,
  PVAE_STAGE_PRETRAINED = 1,
  PVAE_STAGE_JOINT = 2,
  PVAE_STAGE_BASELINE = 3
} pvae_stage;

typedef struct pvae_config pvae_config;
typedef struct pvae_checkpoint pvae_checkpoint;

/* Receives one training log line (no trailing newline) per epoch. */
typedef void (*pvae_log_fn)(const char* line, void* user);

PVAE_API const char* pvae_version(void);
PVAE_API const char* pvae_last_error(void);
PVAE_API const char* pvae_status_name(pvae_status status);

/* Strings returned through char** out-parameters. */
PVAE_API void pvae_string_free(char* s);

/* ---- configuration (`key = value` files) ---- */
PVAE_API pvae_status pvae_config_create(pvae_config** out);
PVAE_API void pvae_config_free(pvae_config* cfg);
PVAE_API pvae_status pvae_config_set(pvae_config* cfg, const char* key, const char* value);
PVAE_API pvae_status pvae_config_load_file(pvae_config* cfg, const char* path);

/* ---- checkpoints ---- */
PVAE_API pvae_status pvae_checkpoint_load(const char* path, pvae_checkpoint** out);
PVAE_API pvae_status pvae_checkpoint_save(const pvae_checkpoint* ckpt, const char* path);
PVAE_API void pvae_checkpoint_free(pvae_checkpoint* ckpt);
PVAE_API pvae_status pvae_checkpoint_stage(const pvae_checkpoint* ckpt, pvae_stage* out);

/* ---- corpus ---- */
/* Synthetic speech and two noise types, mixed per the config. */
PVAE_API pvae_status pvae_synth_generate(const pvae_config* cfg, const char* out_dir,
                                         size_t* rows_out);
/* Mixtures of the *.wav files in clean_dir and noise_dir. */
PVAE_API pvae_status pvae_synth_dirs(const pvae_config* cfg, const char* clean_dir,
                                     const char* noise_dir, const char* out_dir,
                                     size_t* rows_out);

/* ---- training ---- */
PVAE_API pvae_status pvae_pretrain(const pvae_config* cfg, const char* corpus_dir,
                                   const char* out_ckpt, pvae_log_fn log, void* user);
/* in_ckpt == NULL starts from a fresh initialization (rejected: not pretrained). */
PVAE_API pvae_status pvae_train(const pvae_config* cfg, const char* corpus_dir,
                                const char* in_ckpt, const char* out_ckpt, pvae_log_fn log,
                                void* user);
PVAE_API pvae_status pvae_train_baseline(const pvae_config* cfg, const char* corpus_dir,
                                         const char* out_ckpt, pvae_log_fn log, void* user);

/* ---- enhancement ---- */
/* mode: "pvae-l", "pvae-m", "y-l", "y-m" or "passthrough" (ckpt_path may be NULL).
 * samples = 0 decodes posterior means; k > 0 averages k sampled decodes.
 * When ref_wav is given, *si_sdr_out receives SI-SDR(output, reference). */
PVAE_API pvae_status pvae_enhance_file(const char* ckpt_path, const char* mode,
                                       const char* in_wav, const char* out_wav, int samples,
                                       uint64_t seed, const char* ref_wav, double* si_sdr_out);

/* Writes <prefix>_modified.wav and the LPS grids <prefix>_{a,b,modified,recon_a}.lpsgrid. */
PVAE_API pvae_status pvae_swap_files(const char* ckpt_path, const char* a_wav, const char* b_wav,
                                     const char* out_prefix);

/* Per-SNR SI-SDR report (tab-separated). out_path and/or report_out may be NULL. */
PVAE_API pvae_status pvae_eval(const char* corpus_dir, const char* ckpt_path, const char* mode,
                               const char* out_path, char** report_out);

/* Finite-difference check of all total-loss gradients on a tiny model. */
PVAE_API pvae_status pvae_gradcheck(uint64_t seed, double* max_rel_err, size_t* n_checked);

/* ---- buffers ---- */
PVAE_API pvae_status pvae_si_sdr(const double* est, const double* ref, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* PVAE_PVAE_H */
