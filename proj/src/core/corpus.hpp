#pragma once

// Corpus directory layout:
//   manifest.tsv   header `id snr_db snr_measured gain y x d` (tab-separated)
//   mix/<id>_{y,x,d}.wav
// Paths in the manifest are relative to the corpus directory. snr_measured
// is recomputed from the stored 16-bit speech and noise files.

#include <filesystem>
#include <string>
#include <vector>

#include "core/dsp.hpp"

namespace pvae {

enum class Pairing { kCartesian, kRoundRobin };

Pairing parse_pairing(const std::string& s);
const char* pairing_name(Pairing p);

struct NamedWave {
  std::string name;
  Waveform wave;
};

struct ManifestRow {
  std::string id;
  double snr_db = 0.0;
  double snr_measured = 0.0;
  double gain = 1.0;
  std::string y;
  std::string x;
  std::string d;
};

inline constexpr const char* kManifestName = "manifest.tsv";

// Scales the triplet down when the mixture would clip, rounds speech and
// noise to the 16-bit grid and forms y as their exact sum.
MixtureExample quantize_mixture(const MixtureExample& m);

double measured_snr_db(const Waveform& x, const Waveform& d);

// cartesian: every clean x noise x snr. round_robin: clean[i] with
// noise[i % n_noise] at snrs[(i / n_noise) % n_snr].
std::vector<ManifestRow> write_corpus(const std::filesystem::path& dir,
                                      const std::vector<NamedWave>& clean,
                                      const std::vector<NamedWave>& noise,
                                      const std::vector<double>& snrs, Pairing pairing);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

struct CorpusItem {
  ManifestRow row;
  MixtureExample mixture;
};

std::vector<CorpusItem> load_corpus(const std::filesystem::path& dir);

// *.wav files of a directory in name order.
std::vector<NamedWave> read_wav_dir(const std::filesystem::path& dir);

}  // namespace pvae
