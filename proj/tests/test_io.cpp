#include <cstring>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/error.hpp"
#include "core/grid.hpp"
#include "core/synth.hpp"
#include "core/wav.hpp"

using namespace pvae;

namespace {

std::uint32_t u32_at(const std::vector<unsigned char>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t u16_at(const std::vector<unsigned char>& b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

}  // namespace

TEST_CASE("wav header is 16-bit PCM mono 16 kHz") {
  const auto bytes = encode_wav(testing::sine(300.0, 0.1, 0.5));
  REQUIRE(bytes.size() == 44 + 2 * 1600);
  CHECK(std::memcmp(bytes.data(), "RIFF", 4) == 0);
  CHECK(u32_at(bytes, 4) == bytes.size() - 8);
  CHECK(std::memcmp(bytes.data() + 8, "WAVEfmt ", 8) == 0);
  CHECK(u32_at(bytes, 16) == 16);
  CHECK(u16_at(bytes, 20) == 1);
  CHECK(u16_at(bytes, 22) == 1);
  CHECK(u32_at(bytes, 24) == 16000);
  CHECK(u32_at(bytes, 28) == 32000);
  CHECK(u16_at(bytes, 32) == 2);
  CHECK(u16_at(bytes, 34) == 16);
  CHECK(std::memcmp(bytes.data() + 36, "data", 4) == 0);
  CHECK(u32_at(bytes, 40) == 3200);
}

TEST_CASE("wav round trip is exact on the 16-bit grid") {
  auto w = testing::white(3, 800, 0.2);
  for (auto& s : w.samples) s = quantize_sample(s) / 32768.0;
  const auto back = decode_wav(encode_wav(w));
  REQUIRE(back.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(back.samples[i] == w.samples[i]);
}

TEST_CASE("quantize_sample saturates") {
  CHECK(quantize_sample(2.0) == 32767);
  CHECK(quantize_sample(-2.0) == -32768);
  CHECK(quantize_sample(0.5) == 16384);
}

TEST_CASE("decode_wav rejects malformed input") {
  auto bytes = encode_wav(testing::white(1, 100));
  auto bad_rate = bytes;
  bad_rate[24] = 0x40;  // 8000 Hz
  bad_rate[25] = 0x1f;
  CHECK_THROWS_AS(decode_wav(bad_rate), Error);
  auto stereo = bytes;
  stereo[22] = 2;
  CHECK_THROWS_AS(decode_wav(stereo), Error);
  std::vector<unsigned char> junk(bytes.begin(), bytes.begin() + 20);
  CHECK_THROWS_AS(decode_wav(junk), Error);
}

TEST_CASE("write_wav and read_wav") {
  testing::TempDir dir("wav");
  auto w = testing::sine(500.0, 0.2, 0.25);
  write_wav(dir / "a.wav", w);
  const auto r = read_wav(dir / "a.wav");
  REQUIRE(r.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) <= 0.5 / 32768.0 + 1e-15);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), Error);
}

TEST_CASE("lps grid round trip and header") {
  testing::TempDir dir("grid");
  std::mt19937_64 rng(2);
  Eigen::MatrixXd m = testing::randm(rng, 5, 3);
  write_lps_grid(dir / "g.lpsgrid", m);
  const auto bytes = testing::read_bytes(dir / "g.lpsgrid");
  const std::string header = "LPSGRID v1 F=5 N=3\n";
  REQUIRE(bytes.size() == header.size() + 15 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  float first;
  std::memcpy(&first, bytes.data() + header.size() + 4, 4);
  CHECK(first == static_cast<float>(m(1, 0)));
  const auto back = read_lps_grid(dir / "g.lpsgrid");
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(back.data()[i] == static_cast<float>(m.data()[i]));
}

TEST_CASE("quantize_mixture keeps y = x + d exactly") {
  const auto m = quantize_mixture(mix_at_snr(testing::white(1, 4000, 0.9), testing::white(2, 4000, 0.9), -5.0));
  double peak = 0.0;
  for (std::size_t i = 0; i < m.y.size(); ++i) {
    CHECK(m.y.samples[i] == m.x.samples[i] + m.d.samples[i]);
    CHECK(m.x.samples[i] * 32768.0 == std::round(m.x.samples[i] * 32768.0));
    peak = std::max(peak, std::abs(m.y.samples[i]));
  }
  CHECK(peak <= 1.0);
}

TEST_CASE("write_corpus cartesian layout and manifest") {
  testing::TempDir dir("corpus");
  std::vector<NamedWave> clean{{"a", synth_speech(1, 1.0)}, {"b", synth_speech(2, 1.0)}};
  std::vector<NamedWave> noise{{"n1", synth_noise(NoiseKind::kBabble, 3, 2.0)},
                               {"n2", synth_noise(NoiseKind::kTonal, 4, 2.0)}};
  const auto rows = write_corpus(dir.path(), clean, noise, {-5.0, 0.0, 5.0, 10.0}, Pairing::kCartesian);
  CHECK(rows.size() == 16);
  const auto back = read_manifest(dir / kManifestName);
  REQUIRE(back.size() == 16);
  std::set<double> snrs;
  for (const auto& r : back) snrs.insert(r.snr_db);
  CHECK(snrs.size() == 4);

  const auto items = load_corpus(dir.path());
  REQUIRE(items.size() == 16);
  for (const auto& it : items) {
    const auto& m = it.mixture;
    double err = 0.0;
    for (std::size_t i = 0; i < m.y.size(); ++i) err = std::max(err, std::abs(m.y.samples[i] - m.x.samples[i] - m.d.samples[i]));
    CHECK(err < 1e-6);
    CHECK(std::abs(measured_snr_db(m.x, m.d) - it.row.snr_measured) < 1e-9);
    CHECK(std::abs(it.row.snr_measured - it.row.snr_db) < 0.05);
  }
}

TEST_CASE("write_corpus round robin and empty inputs") {
  testing::TempDir dir("rr");
  std::vector<NamedWave> clean;
  for (int i = 0; i < 5; ++i) clean.push_back({"c" + std::to_string(i), synth_speech(10 + i, 0.5)});
  std::vector<NamedWave> noise{{"n", synth_noise(NoiseKind::kBabble, 3, 2.0)}};
  CHECK(write_corpus(dir.path(), clean, noise, {0.0, 5.0}, Pairing::kRoundRobin).size() == 5);
  CHECK_THROWS_WITH_AS(write_corpus(dir / "e", {}, noise, {0.0}, Pairing::kCartesian), doctest::Contains("empty corpus"), Error);
  std::filesystem::create_directories(dir / "empty");
  CHECK_THROWS_WITH_AS(read_wav_dir(dir / "empty"), doctest::Contains("empty corpus"), Error);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# comment\n"
      "latent_dim_speech = 32\n"
      "encoder_channels = 8, 16\n"
      "snrs = -5, 5\n"
      "freeze_pretrained = true\n"
      "ratio_gradient = full\n"
      "seed = 12\n");
  CHECK(c.model.latent_dim_speech == 32);
  CHECK(c.model.encoder_channels == std::vector<int>{8, 16});
  CHECK(c.snrs == std::vector<double>{-5.0, 5.0});
  CHECK(c.train.freeze_pretrained);
  CHECK(c.train.ratio_gradient == RatioGradient::kFull);
  CHECK(c.train.seed == 12);
  CHECK_THROWS_WITH_AS(parse_config("latnet_dim = 3\n"), doctest::Contains("unknown config key"), Error);
  CHECK_THROWS_AS(parse_config("batch_size = many\n"), Error);
  RunConfig bad;
  bad.framing.frame_len = 256;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("defaults") {
  RunConfig c;
  CHECK(c.model.freq_bins == 257);
  CHECK(c.model.latent_dim_speech == 128);
  CHECK(c.model.latent_dim_noise == 128);
  CHECK(c.framing.frame_len == 512);
  CHECK(c.framing.hop == 256);
  CHECK(c.train.ratio_gradient == RatioGradient::kValueOnly);
  c.validate();
}
