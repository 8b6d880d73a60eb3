#include "core/wav.hpp"

#include <cmath>
#include <cstring>

#include "core/error.hpp"
#include "core/io.hpp"

namespace pvae {

std::int16_t quantize_sample(double s) {
  const double v = std::nearbyint(s * 32768.0);
  if (v > 32767.0) return 32767;
  if (v < -32768.0) return -32768;
  return static_cast<std::int16_t>(v);
}

Waveform decode_wav(const std::vector<unsigned char>& bytes) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::kFormat, "unsupported wav: " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw bad("missing RIFF/WAVE header");
  }

  bool have_fmt = false;
  Waveform w;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw bad("truncated chunk");

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = get_u16(f);
      const std::uint16_t channels = get_u16(f + 2);
      const std::uint32_t rate = get_u32(f + 4);
      const std::uint16_t bits = get_u16(f + 14);
      if (format != 1) throw bad("encoding is not PCM");
      if (channels != 1) throw bad("expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw bad("expected 16-bit samples, got " + std::to_string(bits));
      if (rate != kSampleRate) {
        throw bad("expected 16000 Hz, got " + std::to_string(rate) + " Hz");
      }
      w.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      const std::size_t n = size / 2;
      w.samples.resize(n);
      const unsigned char* p = bytes.data() + body;
      for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = static_cast<std::int16_t>(get_u16(p + 2 * i)) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw bad("no data chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  return decode_wav(read_file_bytes(path));
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
  require(w.sample_rate > 0, ErrorCode::kInvalidArgument, "invalid sample rate");
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : w.samples) {
    put_u16(out, static_cast<std::uint16_t>(quantize_sample(s)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  write_file_atomic(path, bytes.data(), bytes.size());
}

}  // namespace pvae
