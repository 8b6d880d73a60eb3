#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pvae/pvae.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitUsage = 64;

struct CliError {
  pvae_status status;
  std::string message;
  bool usage = false;
};

void check(pvae_status s) {
  if (s != PVAE_OK) throw CliError{s, pvae_last_error()};
}

void fail_usage(const std::string& msg) { throw CliError{PVAE_ERR_INVALID_ARGUMENT, msg, true}; }

struct ConfigHandle {
  pvae_config* cfg = nullptr;
  ConfigHandle() { check(pvae_config_create(&cfg)); }
  ~ConfigHandle() { pvae_config_free(cfg); }
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
};

struct LogSink {
  std::ofstream file;
};

void log_line(const char* line, void* user) {
  auto* sink = static_cast<LogSink*>(user);
  std::printf("%s\n", line);
  std::fflush(stdout);
  if (sink->file) {
    sink->file << line << '\n';
    sink->file.flush();
  }
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out;
};

void apply_globals(const Globals& g, ConfigHandle& h) {
  if (!g.config.empty()) check(pvae_config_load_file(h.cfg, g.config.c_str()));
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail_usage("--set expects key=value, got " + kv);
    check(pvae_config_set(h.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (g.seed) check(pvae_config_set(h.cfg, "seed", std::to_string(*g.seed).c_str()));
}

const std::string& need_out(const Globals& g, const char* what) {
  if (g.out.empty()) fail_usage(std::string("--out is required (") + what + ")");
  return g.out;
}

LogSink open_log(const std::string& path) {
  LogSink s;
  s.file.open(path, std::ios::trunc);
  if (!s.file) throw CliError{PVAE_ERR_IO, "cannot write " + path};
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech enhancement with speech / noise latent variable autoencoders"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "key = value configuration file");
  app.add_option("--seed", g.seed, "Seed (overrides the config)");
  app.add_option("--set", g.sets, "Configuration override key=value (repeatable)");
  app.add_option("--out", g.out, "Output path");

  auto* synth = app.add_subcommand("synth", "Write a mixture corpus");
  bool generate = false;
  std::string clean_dir, noise_dir;
  synth->add_flag("--generate", generate, "Use the built-in synthetic speech and noise");
  synth->add_option("--clean", clean_dir, "Directory of clean speech WAVs");
  synth->add_option("--noise", noise_dir, "Directory of noise WAVs");

  std::string corpus, ckpt, log_path;
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the speech and noise autoencoders");
  pretrain->add_option("--corpus", corpus, "Corpus directory")->required();
  pretrain->add_option("--log", log_path, "Epoch log file (default <out>.log)");

  auto* train = app.add_subcommand("train", "Joint training from a pretrained checkpoint");
  train->add_option("--corpus", corpus, "Corpus directory")->required();
  train->add_option("--ckpt", ckpt, "Input checkpoint");
  train->add_option("--log", log_path, "Epoch log file (default <out>.log)");

  auto* baseline = app.add_subcommand("train-baseline", "Train the noisy-input regression baseline");
  baseline->add_option("--corpus", corpus, "Corpus directory")->required();
  baseline->add_option("--log", log_path, "Epoch log file (default <out>.log)");

  std::string mode = "pvae-m", in_wav, ref_wav;
  int samples = 0;
  auto* enhance = app.add_subcommand("enhance", "Enhance one WAV file");
  enhance->add_option("--mode", mode, "pvae-l, pvae-m, y-l, y-m or passthrough");
  enhance->add_option("--ckpt", ckpt, "Checkpoint");
  enhance->add_option("--in", in_wav, "Noisy WAV")->required();
  enhance->add_option("--ref", ref_wav, "Clean reference WAV (prints SI-SDR)");
  enhance->add_option("--samples", samples, "Average this many sampled decodes (0: means)");

  std::string a_wav, b_wav;
  auto* swap = app.add_subcommand("swap", "Speech latent of A with the noise latent of B");
  swap->add_option("--ckpt", ckpt, "Jointly trained checkpoint");
  swap->add_option("--a", a_wav, "Source mixture WAV")->required();
  swap->add_option("--b", b_wav, "Target-noise mixture WAV")->required();

  auto* eval = app.add_subcommand("eval", "Per-SNR SI-SDR report over a corpus");
  eval->add_option("--corpus", corpus, "Corpus directory")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint");
  eval->add_option("--mode", mode, "pvae-l, pvae-m, y-l, y-m or passthrough");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of loss gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "pvae: error[usage]: %s\n", e.what());
    return kExitUsage;
  }

  try {
    const std::uint64_t seed = g.seed.value_or(0);
    if (*synth) {
      ConfigHandle h;
      apply_globals(g, h);
      const std::string& out = need_out(g, "corpus directory");
      size_t rows = 0;
      if (generate) {
        if (!clean_dir.empty() || !noise_dir.empty()) fail_usage("--generate excludes --clean/--noise");
        check(pvae_synth_generate(h.cfg, out.c_str(), &rows));
      } else {
        if (clean_dir.empty() || noise_dir.empty()) fail_usage("synth needs --generate or --clean and --noise");
        check(pvae_synth_dirs(h.cfg, clean_dir.c_str(), noise_dir.c_str(), out.c_str(), &rows));
      }
      std::printf("wrote %zu mixtures to %s\n", rows, out.c_str());
    } else if (*pretrain || *train || *baseline) {
      ConfigHandle h;
      apply_globals(g, h);
      const std::string& out = need_out(g, "checkpoint");
      LogSink sink = open_log(log_path.empty() ? out + ".log" : log_path);
      if (*pretrain) {
        check(pvae_pretrain(h.cfg, corpus.c_str(), out.c_str(), log_line, &sink));
      } else if (*train) {
        check(pvae_train(h.cfg, corpus.c_str(), ckpt.empty() ? nullptr : ckpt.c_str(), out.c_str(),
                         log_line, &sink));
      } else {
        check(pvae_train_baseline(h.cfg, corpus.c_str(), out.c_str(), log_line, &sink));
      }
    } else if (*enhance) {
      const std::string& out = need_out(g, "enhanced WAV");
      if (samples < 0) fail_usage("--samples must be >= 0");
      double score = 0.0;
      check(pvae_enhance_file(ckpt.c_str(), mode.c_str(), in_wav.c_str(), out.c_str(), samples,
                              seed, ref_wav.empty() ? nullptr : ref_wav.c_str(), &score));
      if (!ref_wav.empty()) std::printf("%s\tsi_sdr=%.6f\n", in_wav.c_str(), score);
    } else if (*swap) {
      const std::string& out = need_out(g, "output prefix");
      check(pvae_swap_files(ckpt.c_str(), a_wav.c_str(), b_wav.c_str(), out.c_str()));
    } else if (*eval) {
      char* report = nullptr;
      check(pvae_eval(corpus.c_str(), ckpt.c_str(), mode.c_str(),
                      g.out.empty() ? nullptr : g.out.c_str(), &report));
      std::fputs(report, stdout);
      pvae_string_free(report);
    } else if (*gradcheck) {
      double max_rel = 0.0;
      size_t n = 0;
      check(pvae_gradcheck(seed, &max_rel, &n));
      std::printf("gradcheck checked=%zu max_rel_err=%.3e\n", n, max_rel);
    }
  } catch (const CliError& e) {
    std::string msg = e.message;
    for (char& c : msg) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    if (e.usage) {
      std::fprintf(stderr, "pvae: error[usage]: %s\n", msg.c_str());
      return kExitUsage;
    }
    std::fprintf(stderr, "pvae: error[%s]: %s\n", pvae_status_name(e.status), msg.c_str());
    return e.status == PVAE_ERR_NOT_FOUND ? kExitNotFound : kExitFailure;
  }
  return 0;
}
