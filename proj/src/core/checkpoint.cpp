#include "core/checkpoint.hpp"

#include <cstring>
#include <sstream>
#include <string>
#include <utility>

#include <zlib.h>

#include "core/error.hpp"
#include "core/io.hpp"

namespace pvae {
namespace {

constexpr char kMagic[4] = {'P', 'V', 'A', 'E'};

using Meta = std::vector<std::pair<std::string, std::string>>;

struct NamedArray {
  std::string name;
  const Eigen::MatrixXd* value;
};

void put_str(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint32_t u32() {
    need(4);
    auto v = get_u32(p_ + pos_);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    auto v = get_u64(p_ + pos_);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    require(pos_ + k <= n_, ErrorCode::kCorrupt, "corrupt checkpoint: truncated manifest");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

Meta config_meta(const ModelConfig& c, const Framing& f) {
  return {{"freq_bins", std::to_string(c.freq_bins)},
          {"latent_dim_speech", std::to_string(c.latent_dim_speech)},
          {"latent_dim_noise", std::to_string(c.latent_dim_noise)},
          {"encoder_channels", join_ints(c.encoder_channels)},
          {"kernel_size", std::to_string(c.kernel_size)},
          {"conv_stride", std::to_string(c.conv_stride)},
          {"nsvae_shared_trunk", c.nsvae_shared_trunk ? "1" : "0"},
          {"frame_len", std::to_string(f.frame_len)},
          {"hop", std::to_string(f.hop)}};
}

void apply_meta(const Meta& meta, ModelConfig& c, Framing& f) {
  for (const auto& [k, v] : meta) {
    try {
      if (k == "freq_bins") c.freq_bins = std::stoi(v);
      else if (k == "latent_dim_speech") c.latent_dim_speech = std::stoi(v);
      else if (k == "latent_dim_noise") c.latent_dim_noise = std::stoi(v);
      else if (k == "encoder_channels") c.encoder_channels = split_ints(v);
      else if (k == "kernel_size") c.kernel_size = std::stoi(v);
      else if (k == "conv_stride") c.conv_stride = std::stoi(v);
      else if (k == "nsvae_shared_trunk") c.nsvae_shared_trunk = v == "1";
      else if (k == "frame_len") f.frame_len = std::stoi(v);
      else if (k == "hop") f.hop = std::stoi(v);
      else throw Error(ErrorCode::kIncompatible, "incompatible checkpoint: unknown key " + k);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kCorrupt, "corrupt checkpoint: bad value for " + k);
    }
  }
}

Eigen::MatrixXd column(const Eigen::VectorXd& v) { return Eigen::MatrixXd(v); }

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kInit: return "init";
    case Stage::kPretrained: return "pretrained";
    case Stage::kJoint: return "joint";
    case Stage::kBaseline: return "baseline";
  }
  return "unknown";
}

FeatureNorms rounded_norms(const FeatureNorms& norms) {
  FeatureNorms out = norms;
  for (FeatureNorm* n : {&out.y, &out.x, &out.d}) {
    Eigen::MatrixXd m = n->mean, s = n->std;
    round_to_float(m);
    round_to_float(s);
    n->mean = m;
    n->std = s;
  }
  return out;
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
  // Keep the norm matrices alive while their pointers sit in `arrays`.
  std::vector<Eigen::MatrixXd> norm_storage;
  std::vector<std::string> norm_names;
  const std::pair<const char*, const FeatureNorm*> streams[] = {
      {"y", &ckpt.config.feature_norm.y}, {"x", &ckpt.config.feature_norm.x},
      {"d", &ckpt.config.feature_norm.d}};
  for (const auto& [tag, n] : streams) {
    if (n->empty()) continue;
    norm_storage.push_back(column(n->mean));
    norm_names.push_back(std::string("norm/") + tag + "/mean");
    norm_storage.push_back(column(n->std));
    norm_names.push_back(std::string("norm/") + tag + "/std");
  }
  std::vector<Eigen::MatrixXd> steps;
  steps.reserve(ckpt.optimizer.slots.size());
  for (const auto& slot : ckpt.optimizer.slots) {
    steps.push_back(Eigen::MatrixXd::Constant(1, 1, static_cast<double>(slot.step)));
  }

  std::vector<NamedArray> arrays;
  for (const auto& p : ckpt.params) arrays.push_back({p.name, &p.value});
  for (std::size_t i = 0; i < norm_storage.size(); ++i) arrays.push_back({norm_names[i], &norm_storage[i]});
  if (!ckpt.optimizer.slots.empty()) {
    require(ckpt.optimizer.slots.size() == ckpt.params.size(), ErrorCode::kShape,
            "optimizer state does not match parameters");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const auto& name = ckpt.params[i].name;
      arrays.push_back({"adam/" + name + "/m", &ckpt.optimizer.slots[i].m});
      arrays.push_back({"adam/" + name + "/v", &ckpt.optimizer.slots[i].v});
      arrays.push_back({"adam/" + name + "/step", &steps[i]});
    }
  }

  std::vector<unsigned char> manifest;
  put_u32(manifest, static_cast<std::uint32_t>(ckpt.stage));
  const Meta meta = config_meta(ckpt.config, ckpt.framing);
  put_u32(manifest, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(manifest, k);
    put_str(manifest, v);
  }
  put_u32(manifest, static_cast<std::uint32_t>(arrays.size()));
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    put_str(manifest, a.name);
    put_u32(manifest, 2);
    put_u32(manifest, static_cast<std::uint32_t>(a.value->rows()));
    put_u32(manifest, static_cast<std::uint32_t>(a.value->cols()));
    put_u64(manifest, offset);
    offset += static_cast<std::uint64_t>(a.value->size()) * 4;
  }

  std::vector<unsigned char> payload;
  payload.reserve(offset);
  for (const auto& a : arrays) {
    for (Eigen::Index i = 0; i < a.value->size(); ++i) {
      const float f = static_cast<float>(a.value->data()[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(payload, bits);
    }
  }

  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.insert(out.end(), manifest.begin(), manifest.end());
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
  put_u32(out, crc);
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kCorrupt,
          "corrupt checkpoint: bad magic");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  require(version == kCheckpointVersion, ErrorCode::kIncompatible,
          "incompatible checkpoint: format version " + std::to_string(version));
  const std::uint32_t manifest_len = get_u32(bytes.data() + 8);
  require(12 + static_cast<std::size_t>(manifest_len) <= bytes.size(), ErrorCode::kCorrupt,
          "corrupt checkpoint: truncated manifest");

  Reader r(bytes.data() + 12, manifest_len);
  Checkpoint ckpt;
  const std::uint32_t stage = r.u32();
  require(stage <= static_cast<std::uint32_t>(Stage::kBaseline), ErrorCode::kCorrupt,
          "corrupt checkpoint: unknown stage");
  ckpt.stage = static_cast<Stage>(stage);
  Meta meta;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    meta.emplace_back(std::move(k), r.str());
  }
  apply_meta(meta, ckpt.config, ckpt.framing);

  struct Entry {
    std::string name;
    std::uint32_t rows, cols;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  const std::uint32_t n_arrays = r.u32();
  std::uint64_t expected = 0;
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    Entry e;
    e.name = r.str();
    const std::uint32_t ndim = r.u32();
    require(ndim == 2, ErrorCode::kCorrupt, "corrupt checkpoint: unsupported rank");
    e.rows = r.u32();
    e.cols = r.u32();
    e.offset = r.u64();
    require(e.offset == expected, ErrorCode::kCorrupt, "corrupt checkpoint: bad array offset");
    expected += static_cast<std::uint64_t>(e.rows) * e.cols * 4;
    entries.push_back(std::move(e));
  }
  require(r.done(), ErrorCode::kCorrupt, "corrupt checkpoint: trailing manifest bytes");

  const std::size_t payload_begin = 12 + manifest_len;
  require(bytes.size() == payload_begin + expected + 4, ErrorCode::kCorrupt,
          "corrupt checkpoint: truncated payload");
  const unsigned char* payload = bytes.data() + payload_begin;
  const auto crc = static_cast<std::uint32_t>(crc32(0L, payload, static_cast<uInt>(expected)));
  require(crc == get_u32(payload + expected), ErrorCode::kCorrupt,
          "corrupt checkpoint: checksum mismatch");

  auto read_array = [&](const Entry& e) {
    Eigen::MatrixXd m(e.rows, e.cols);
    const unsigned char* p = payload + e.offset;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const std::uint32_t bits = get_u32(p + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      m.data()[i] = f;
    }
    return m;
  };

  std::vector<std::pair<std::string, Eigen::MatrixXd>> adam_arrays;
  for (const auto& e : entries) {
    if (e.name.starts_with("norm/")) {
      Eigen::MatrixXd m = read_array(e);
      FeatureNorm* n = nullptr;
      const char tag = e.name.size() > 5 ? e.name[5] : '?';
      if (tag == 'y') n = &ckpt.config.feature_norm.y;
      else if (tag == 'x') n = &ckpt.config.feature_norm.x;
      else if (tag == 'd') n = &ckpt.config.feature_norm.d;
      require(n != nullptr, ErrorCode::kCorrupt, "corrupt checkpoint: unknown array " + e.name);
      if (e.name.ends_with("/mean")) n->mean = m.col(0);
      else n->std = m.col(0);
    } else if (e.name.starts_with("adam/")) {
      adam_arrays.emplace_back(e.name, read_array(e));
    } else {
      const std::size_t i = ckpt.params.add(e.name, e.rows, e.cols);
      ckpt.params[i].value = read_array(e);
    }
  }

  if (!adam_arrays.empty()) {
    require(adam_arrays.size() == 3 * ckpt.params.size(), ErrorCode::kCorrupt,
            "corrupt checkpoint: optimizer state incomplete");
    ckpt.optimizer.slots.resize(ckpt.params.size());
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const std::string base = "adam/" + ckpt.params[i].name;
      auto& slot = ckpt.optimizer.slots[i];
      require(adam_arrays[3 * i].first == base + "/m" && adam_arrays[3 * i + 1].first == base + "/v" &&
                  adam_arrays[3 * i + 2].first == base + "/step",
              ErrorCode::kCorrupt, "corrupt checkpoint: optimizer state out of order");
      slot.m = std::move(adam_arrays[3 * i].second);
      slot.v = std::move(adam_arrays[3 * i + 1].second);
      slot.step = static_cast<std::int64_t>(adam_arrays[3 * i + 2].second(0, 0));
    }
  }
  ckpt.config.validate();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  write_file_atomic(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorCode::kNotFound, "checkpoint not found");
  return deserialize_checkpoint(read_file_bytes(path));
}

Checkpoint make_checkpoint(const PvaeModel& model, const AdamState& optimizer, Stage stage,
                           const Framing& framing) {
  Checkpoint c;
  c.stage = stage;
  c.config = model.config;
  c.config.feature_norm = rounded_norms(model.config.feature_norm);
  c.framing = framing;
  c.params = model.params;
  c.optimizer = optimizer;
  return c;
}

PvaeModel model_from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.stage != Stage::kBaseline, ErrorCode::kStage,
          "checkpoint holds a baseline model, not the three autoencoders");
  PvaeModel m = build_model(ckpt.config);
  require(m.params.size() == ckpt.params.size(), ErrorCode::kIncompatible,
          "incompatible checkpoint: parameter count does not match config");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& src = ckpt.params[i];
    auto& dst = m.params[i];
    require(src.name == dst.name && src.value.rows() == dst.value.rows() &&
                src.value.cols() == dst.value.cols(),
            ErrorCode::kIncompatible, "incompatible checkpoint: layout mismatch at " + src.name);
    dst.value = src.value;
  }
  audit_shapes(m);
  return m;
}

Checkpoint make_baseline_checkpoint(const BaselineModel& model, const AdamState& optimizer,
                                    const Framing& framing) {
  Checkpoint c;
  c.stage = Stage::kBaseline;
  c.config = model.config;
  c.config.feature_norm = rounded_norms(model.config.feature_norm);
  c.framing = framing;
  c.params = model.params;
  c.optimizer = optimizer;
  return c;
}

BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.stage == Stage::kBaseline, ErrorCode::kStage, "checkpoint is not a baseline model");
  BaselineModel m = build_baseline(ckpt.config);
  require(m.params.size() == ckpt.params.size(), ErrorCode::kIncompatible,
          "incompatible checkpoint: parameter count does not match config");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& src = ckpt.params[i];
    auto& dst = m.params[i];
    require(src.name == dst.name && src.value.rows() == dst.value.rows() &&
                src.value.cols() == dst.value.cols(),
            ErrorCode::kIncompatible, "incompatible checkpoint: layout mismatch at " + src.name);
    dst.value = src.value;
  }
  return m;
}

}  // namespace pvae
