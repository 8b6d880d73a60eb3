#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/dsp.hpp"

namespace pvae {

// RIFF PCM, 16-bit signed little-endian, mono, 16 kHz only.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(const std::vector<unsigned char>& bytes);

// Samples are scaled by 32768, rounded and saturated to int16. Written
// atomically (temporary file + rename).
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<unsigned char> encode_wav(const Waveform& w);

std::int16_t quantize_sample(double s);

}  // namespace pvae
