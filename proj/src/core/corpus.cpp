#include "core/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/io.hpp"
#include "core/wav.hpp"

namespace pvae {
namespace {

constexpr double kPeakLimit = 0.99;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

Waveform on_grid(const std::vector<double>& s) {
  Waveform w;
  w.samples.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) w.samples[i] = quantize_sample(s[i]) / 32768.0;
  return w;
}

}  // namespace

Pairing parse_pairing(const std::string& s) {
  if (s == "cartesian") return Pairing::kCartesian;
  if (s == "round_robin") return Pairing::kRoundRobin;
  throw Error(ErrorCode::kInvalidArgument, "unknown pairing: " + s);
}

const char* pairing_name(Pairing p) {
  return p == Pairing::kCartesian ? "cartesian" : "round_robin";
}

double measured_snr_db(const Waveform& x, const Waveform& d) {
  return 10.0 * std::log10(mean_power(x.samples) / mean_power(d.samples));
}

MixtureExample quantize_mixture(const MixtureExample& m) {
  double peak = 0.0;
  for (std::size_t i = 0; i < m.y.size(); ++i) {
    peak = std::max(peak, std::abs(m.x.samples[i]) + std::abs(m.d.samples[i]));
  }
  const double scale = peak > kPeakLimit ? kPeakLimit / peak : 1.0;
  std::vector<double> xs = m.x.samples, ds = m.d.samples;
  for (double& v : xs) v *= scale;
  for (double& v : ds) v *= scale;
  MixtureExample q;
  q.x = on_grid(xs);
  q.d = on_grid(ds);
  q.y.samples.resize(q.x.size());
  for (std::size_t i = 0; i < q.x.size(); ++i) q.y.samples[i] = q.x.samples[i] + q.d.samples[i];
  q.snr_db = m.snr_db;
  q.gain = m.gain;
  return q;
}

std::vector<ManifestRow> write_corpus(const std::filesystem::path& dir,
                                      const std::vector<NamedWave>& clean,
                                      const std::vector<NamedWave>& noise,
                                      const std::vector<double>& snrs, Pairing pairing) {
  require(!clean.empty() && !noise.empty() && !snrs.empty(), ErrorCode::kEmptyCorpus,
          "empty corpus");
  struct Job {
    std::size_t c, n;
    double snr;
  };
  std::vector<Job> jobs;
  if (pairing == Pairing::kCartesian) {
    for (std::size_t c = 0; c < clean.size(); ++c)
      for (std::size_t n = 0; n < noise.size(); ++n)
        for (double s : snrs) jobs.push_back({c, n, s});
  } else {
    for (std::size_t c = 0; c < clean.size(); ++c) {
      jobs.push_back({c, c % noise.size(), snrs[(c / noise.size()) % snrs.size()]});
    }
  }

  std::filesystem::create_directories(dir / "mix");
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    const Waveform& x = clean[j.c].wave;
    validate_pipeline_input(x);
    validate_pipeline_input(noise[j.n].wave);
    const MixtureExample q =
        quantize_mixture(mix_at_snr(x, noise_segment(noise[j.n].wave, x.size(), i), j.snr));
    char id[32];
    std::snprintf(id, sizeof id, "%05zu", i);
    ManifestRow r;
    r.id = id;
    r.snr_db = j.snr;
    r.snr_measured = measured_snr_db(q.x, q.d);
    r.gain = q.gain;
    r.y = "mix/" + r.id + "_y.wav";
    r.x = "mix/" + r.id + "_x.wav";
    r.d = "mix/" + r.id + "_d.wav";
    write_wav(dir / r.y, q.y);
    write_wav(dir / r.x, q.x);
    write_wav(dir / r.d, q.d);
    rows.push_back(std::move(r));
  }
  write_manifest(dir / kManifestName, rows);
  return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::string out = "id\tsnr_db\tsnr_measured\tgain\ty\tx\td\n";
  for (const auto& r : rows) {
    out += r.id + '\t' + fmt17(r.snr_db) + '\t' + fmt17(r.snr_measured) + '\t' + fmt17(r.gain) +
           '\t' + r.y + '\t' + r.x + '\t' + r.d + '\n';
  }
  write_file_atomic(path, out);
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorCode::kNotFound,
          "manifest not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "id\tsnr_db\tsnr_measured\tgain\ty\tx\td",
          ErrorCode::kFormat, "manifest: unexpected header");
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    require(f.size() == 7, ErrorCode::kFormat,
            "manifest line " + std::to_string(lineno) + ": expected 7 fields");
    ManifestRow r;
    r.id = f[0];
    try {
      r.snr_db = std::stod(f[1]);
      r.snr_measured = std::stod(f[2]);
      r.gain = std::stod(f[3]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kFormat, "manifest line " + std::to_string(lineno) + ": bad number");
    }
    r.y = f[4];
    r.x = f[5];
    r.d = f[6];
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), ErrorCode::kEmptyCorpus, "empty corpus");
  return rows;
}

std::vector<CorpusItem> load_corpus(const std::filesystem::path& dir) {
  const auto rows = read_manifest(dir / kManifestName);
  std::vector<CorpusItem> items;
  items.reserve(rows.size());
  for (const auto& r : rows) {
    CorpusItem it;
    it.row = r;
    it.mixture.y = read_wav(dir / r.y);
    it.mixture.x = read_wav(dir / r.x);
    it.mixture.d = read_wav(dir / r.d);
    it.mixture.snr_db = r.snr_db;
    it.mixture.gain = r.gain;
    require(it.mixture.y.size() == it.mixture.x.size() && it.mixture.y.size() == it.mixture.d.size(),
            ErrorCode::kFormat, "corpus item " + r.id + ": triplet lengths differ");
    items.push_back(std::move(it));
  }
  return items;
}

std::vector<NamedWave> read_wav_dir(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kNotFound,
          "directory not found: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  require(!paths.empty(), ErrorCode::kEmptyCorpus, "empty corpus: no wav files in " + dir.string());
  std::vector<NamedWave> out;
  for (const auto& p : paths) out.push_back({p.stem().string(), read_wav(p)});
  return out;
}

}  // namespace pvae
