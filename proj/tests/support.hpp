#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/dsp.hpp"
#include "core/model.hpp"

namespace testing {

inline pvae::Waveform sine(double hz, double seconds, double amp = 1.0) {
  pvae::Waveform w;
  const auto n = static_cast<std::size_t>(seconds * pvae::kSampleRate);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / pvae::kSampleRate);
  }
  return w;
}

inline pvae::Waveform white(std::uint64_t seed, std::size_t n, double sd = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  pvae::Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = dist(rng);
  return w;
}

inline Eigen::VectorXd randn(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Eigen::MatrixXd randm(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline pvae::DiagGaussian random_gaussian(std::mt19937_64& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> lv(-1.5, 1.0);
  pvae::DiagGaussian g;
  g.mean = randn(rng, dim);
  g.log_var.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) g.log_var[i] = lv(rng);
  return g;
}

inline pvae::ModelConfig tiny_config(int bins = 17, int latent = 4) {
  pvae::ModelConfig c;
  c.freq_bins = bins;
  c.latent_dim_speech = latent;
  c.latent_dim_noise = latent;
  c.encoder_channels = {2, 3};
  return c;
}

// Self-removing scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pvae_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  std::vector<unsigned char> out;
  if (!f) return out;
  unsigned char buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.insert(out.end(), buf, buf + n);
  std::fclose(f);
  return out;
}

}  // namespace testing
