#pragma once

// Checkpoint file layout (all integers little-endian):
//   "PVAE" | u32 version | u32 manifest_len | manifest | f32 payload | u32 crc32(payload)
// manifest:
//   u32 stage | u32 n_meta | n_meta x (str key, str value)
//   | u32 n_arrays | n_arrays x (str name, u32 ndim=2, u32 rows, u32 cols, u64 byte_offset)
// str = u32 length + bytes. Arrays are column-major within the payload.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/adam.hpp"
#include "core/baseline.hpp"
#include "core/dsp.hpp"
#include "core/model.hpp"
#include "core/params.hpp"

namespace pvae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Stage : std::uint32_t { kInit = 0, kPretrained = 1, kJoint = 2, kBaseline = 3 };

const char* stage_name(Stage s);

struct Checkpoint {
  Stage stage = Stage::kInit;
  ModelConfig config;
  Framing framing;
  ParamStore params;
  AdamState optimizer;  // may be empty (no slots)
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const PvaeModel& model, const AdamState& optimizer, Stage stage,
                           const Framing& framing);
// Rebuilds the autoencoder layout from the stored config and copies the values in.
PvaeModel model_from_checkpoint(const Checkpoint& ckpt);

Checkpoint make_baseline_checkpoint(const BaselineModel& model, const AdamState& optimizer,
                                    const Framing& framing);
BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt);

// Norms as stored: rounded to float32.
FeatureNorms rounded_norms(const FeatureNorms& norms);

}  // namespace pvae
