#pragma once

// Synthetic stand-ins for speech and noise recordings.
//
// speech: syllable-like harmonic complexes (gliding f0, moving formant
//   envelopes) with unvoiced bursts and pauses.
// babble: a cluster of slowly amplitude-modulated low-band tones over pink noise.
// tonal:  high-passed broadband noise with steady tones at 2.6, 3.8 and 5.2 kHz.

#include <cstdint>
#include <string_view>

#include "core/dsp.hpp"

namespace pvae {

enum class NoiseKind { kBabble, kTonal };

const char* noise_kind_name(NoiseKind k);

// Peak-normalized to 0.5.
Waveform synth_speech(std::uint64_t seed, double seconds);
Waveform synth_noise(NoiseKind kind, std::uint64_t seed, double seconds);

}  // namespace pvae
