#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  Scratch() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("pvae_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Run pvae(const Scratch& dir, const std::string& args) {
  const std::string out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + PVAE_CLI_PATH + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

// Tiny settings so the whole pipeline runs in a few seconds.
std::string write_config(const Scratch& dir) {
  const std::string path = dir / "tiny.cfg";
  std::ofstream f(path);
  f << "# tiny run\n"
       "latent_dim_speech = 4\n"
       "latent_dim_noise = 4\n"
       "encoder_channels = 2, 3\n"
       "epochs_pretrain = 2\n"
       "epochs_joint = 1\n"
       "epochs_baseline = 1\n"
       "batch_size = 64\n"
       "snrs = -5, 0, 5, 10\n"
       "synth_utterances = 2\n"
       "synth_utterance_seconds = 1\n"
       "synth_noise_seconds = 3\n";
  return path;
}

struct Wav {
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<double> samples;
};

template <class T>
T le(const std::string& b, std::size_t at) {
  T v{};
  std::memcpy(&v, b.data() + at, sizeof v);
  return v;
}

Wav read_pcm(const std::string& path) {
  const std::string b = slurp(path);
  Wav w;
  REQUIRE(b.size() >= 44);
  REQUIRE(b.compare(0, 4, "RIFF") == 0);
  REQUIRE(b.compare(8, 4, "WAVE") == 0);
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const auto len = le<std::uint32_t>(b, pos + 4);
    if (id == "fmt ") {
      w.format = le<std::uint16_t>(b, pos + 8);
      w.channels = le<std::uint16_t>(b, pos + 10);
      w.rate = le<std::uint32_t>(b, pos + 12);
      w.bits = le<std::uint16_t>(b, pos + 22);
    } else if (id == "data") {
      for (std::size_t i = 0; i + 1 < len; i += 2) w.samples.push_back(le<std::int16_t>(b, pos + 8 + i) / 32768.0);
    }
    pos += 8 + len + (len & 1);
  }
  return w;
}

struct Grid {
  int f = 0, n = 0;
  std::vector<float> values;
};

Grid read_grid(const std::string& path) {
  const std::string b = slurp(path);
  const auto nl = b.find('\n');
  REQUIRE(nl != std::string::npos);
  Grid g;
  REQUIRE(std::sscanf(b.substr(0, nl).c_str(), "LPSGRID v1 F=%d N=%d", &g.f, &g.n) == 2);
  REQUIRE(b.size() == nl + 1 + 4ull * g.f * g.n);
  g.values.resize(static_cast<std::size_t>(g.f) * g.n);
  std::memcpy(g.values.data(), b.data() + nl + 1, 4 * g.values.size());
  return g;
}

std::vector<std::vector<std::string>> read_tsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("synth writes a cartesian corpus of exact mixtures") {
  Scratch dir;
  const std::string cfg = write_config(dir);
  const Run r = pvae(dir, "--config '" + cfg + "' --set synth_pairing=cartesian --out '" + (dir / "c") + "' synth --generate");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("wrote 16 mixtures") != std::string::npos);
  const auto rows = read_tsv(slurp(dir / "c/manifest.tsv"));
  REQUIRE(rows.size() == 17);
  CHECK(rows[0] == std::vector<std::string>{"id", "snr_db", "snr_measured", "gain", "y", "x", "d"});
  std::set<std::string> snrs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    snrs.insert(rows[i][1]);
    const Wav y = read_pcm(dir / ("c/" + rows[i][4]));
    const Wav x = read_pcm(dir / ("c/" + rows[i][5]));
    const Wav d = read_pcm(dir / ("c/" + rows[i][6]));
    REQUIRE(x.samples.size() == y.samples.size());
    REQUIRE(d.samples.size() == y.samples.size());
    double err = 0.0, px = 0.0, pd = 0.0;
    for (std::size_t k = 0; k < y.samples.size(); ++k) {
      err = std::max(err, std::abs(y.samples[k] - x.samples[k] - d.samples[k]));
      px += x.samples[k] * x.samples[k];
      pd += d.samples[k] * d.samples[k];
    }
    CHECK(err < 1e-6);
    CHECK(std::abs(10.0 * std::log10(px / pd) - std::stod(rows[i][2])) < 1e-9);
    CHECK(std::abs(std::stod(rows[i][2]) - std::stod(rows[i][1])) < 0.1);
  }
  CHECK(snrs.size() == 4);
}

TEST_CASE("error contract") {
  Scratch dir;
  Run r = pvae(dir, "--out '" + (dir / "o.wav") + "' enhance --mode pvae-m --ckpt '" + (dir / "none.ckpt") +
                        "' --in '" + (dir / "none.wav") + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("checkpoint not found") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(std::regex_search(r.err, std::regex("^pvae: error\\[not_found\\]: ")));

  r = pvae(dir, "--set latnet_dim=3 --out '" + (dir / "c") + "' synth --generate");
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown config key") != std::string::npos);

  r = pvae(dir, "frobnicate");
  CHECK(r.code == 64);
  r = pvae(dir, "synth --generate");
  CHECK(r.code == 64);
  CHECK(r.err.find("--out is required") != std::string::npos);
}

TEST_CASE("pipeline through the command line") {
  Scratch dir;
  const std::string cfg = "--config '" + write_config(dir) + "' ";
  const std::string corpus = dir / "c";
  REQUIRE(pvae(dir, cfg + "--out '" + corpus + "' synth --generate").code == 0);

  Run r = pvae(dir, cfg + "--out '" + (dir / "j.ckpt") + "' train --corpus '" + corpus + "'");
  CHECK(r.code == 1);
  CHECK(r.err.find("model not pretrained") != std::string::npos);

  r = pvae(dir, cfg + "--out '" + (dir / "p.ckpt") + "' pretrain --corpus '" + corpus + "'");
  REQUIRE(r.code == 0);
  const std::regex line(
      "epoch=[0-9]+ stage=(pretrain|joint|baseline)( [a-z_]+=-?[0-9.e+-]+(inf|nan)?)+");
  const auto log = read_tsv(slurp(dir / "p.ckpt.log"));
  REQUIRE(log.size() == 2);
  for (const auto& l : log) CHECK(std::regex_match(l[0], line));
  CHECK(r.out == slurp(dir / "p.ckpt.log"));

  r = pvae(dir, cfg + "--out '" + (dir / "j.ckpt") + "' train --corpus '" + corpus + "' --ckpt '" + (dir / "p.ckpt") + "'");
  REQUIRE(r.code == 0);
  CHECK(std::regex_match(read_tsv(r.out)[0][0], line));

  const std::string in = corpus + "/mix/00005_y.wav";
  r = pvae(dir, "--out '" + (dir / "e.wav") + "' enhance --mode pvae-m --ckpt '" + (dir / "j.ckpt") + "' --in '" + in +
                    "' --ref '" + corpus + "/mix/00005_x.wav'");
  REQUIRE(r.code == 0);
  CHECK(std::regex_search(r.out, std::regex("\tsi_sdr=-?[0-9]+\\.[0-9]{6}\n$")));
  const Wav e = read_pcm(dir / "e.wav");
  CHECK(e.format == 1);
  CHECK(e.channels == 1);
  CHECK(e.rate == 16000);
  CHECK(e.bits == 16);
  CHECK(!e.samples.empty());

  r = pvae(dir, "--out '" + (dir / "x.wav") + "' enhance --mode pvae-l --ckpt '" + (dir / "p.ckpt") + "' --in '" + in + "'");
  CHECK(r.code == 1);
  CHECK(r.err.find("model not jointly trained") != std::string::npos);

  REQUIRE(pvae(dir, "--out '" + (dir / "s") + "' swap --ckpt '" + (dir / "j.ckpt") + "' --a '" + in + "' --b '" +
                        corpus + "/mix/00001_y.wav'").code == 0);
  const Grid ga = read_grid(dir / "s_a.lpsgrid"), gb = read_grid(dir / "s_b.lpsgrid"),
             gm = read_grid(dir / "s_modified.lpsgrid");
  CHECK(ga.f == 257);
  CHECK(ga.f == gb.f);
  CHECK(ga.n == gb.n);
  CHECK(ga.f == gm.f);
  CHECK(ga.n == gm.n);
  CHECK(read_pcm(dir / "s_modified.wav").rate == 16000);

  REQUIRE(pvae(dir, "--out '" + (dir / "t") + "' swap --ckpt '" + (dir / "j.ckpt") + "' --a '" + in + "' --b '" + in +
                        "'").code == 0);
  const Grid same = read_grid(dir / "t_modified.lpsgrid"), rec = read_grid(dir / "t_recon_a.lpsgrid");
  REQUIRE(same.values.size() == rec.values.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < rec.values.size(); ++i) worst = std::max(worst, double(std::abs(same.values[i] - rec.values[i])));
  CHECK(worst < 1e-6);

  r = pvae(dir, "--out '" + (dir / "r.tsv") + "' eval --corpus '" + corpus + "' --mode passthrough");
  REQUIRE(r.code == 0);
  CHECK(r.out == slurp(dir / "r.tsv"));
  const auto report = read_tsv(r.out);
  REQUIRE(report.size() == 5);
  for (std::size_t i = 1; i < report.size(); ++i) {
    CHECK(report[i][2] == report[i][4]);
    CHECK(report[i][3] == report[i][5]);
  }
}

TEST_CASE("reruns are byte identical") {
  Scratch dir;
  const std::string cfg = "--config '" + write_config(dir) + "' --seed 11 ";
  auto run = [&](const std::string& tag) {
    const std::string c = dir / (tag + "c");
    REQUIRE(pvae(dir, cfg + "--out '" + c + "' synth --generate").code == 0);
    REQUIRE(pvae(dir, cfg + "--out '" + (dir / (tag + "p.ckpt")) + "' pretrain --corpus '" + c + "'").code == 0);
    REQUIRE(pvae(dir, cfg + "--out '" + (dir / (tag + "j.ckpt")) + "' train --corpus '" + c + "' --ckpt '" +
                          (dir / (tag + "p.ckpt")) + "'").code == 0);
    REQUIRE(pvae(dir, cfg + "--out '" + (dir / (tag + "r.tsv")) + "' eval --corpus '" + c + "' --mode pvae-m --ckpt '" +
                          (dir / (tag + "j.ckpt")) + "'").code == 0);
  };
  run("a");
  run("b");
  CHECK(slurp(dir / "ac/manifest.tsv") == slurp(dir / "bc/manifest.tsv"));
  CHECK(slurp(dir / "ac/mix/00003_y.wav") == slurp(dir / "bc/mix/00003_y.wav"));
  CHECK(slurp(dir / "ap.ckpt") == slurp(dir / "bp.ckpt"));
  CHECK(slurp(dir / "aj.ckpt") == slurp(dir / "bj.ckpt"));
  CHECK(slurp(dir / "ar.tsv") == slurp(dir / "br.tsv"));
  CHECK(slurp(dir / "aj.ckpt.log") == slurp(dir / "bj.ckpt.log"));
}
