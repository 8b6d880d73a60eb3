#include "core/config.hpp"

#include <charconv>
#include <sstream>

#include "core/error.hpp"
#include "core/io.hpp"

namespace pvae {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kInvalidArgument,
              "invalid config value for " + std::string(key) + ": '" + std::string(value) + "'");
}

template <typename T>
T parse_int(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  bad_value(key, v);
}

template <typename T, typename F>
std::vector<T> parse_list(std::string_view key, std::string_view v, F parse_one) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
    if (item.empty()) bad_value(key, v);
    out.push_back(parse_one(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

const std::vector<std::string> kKeys = {
    "freq_bins",       "latent_dim_speech", "latent_dim_noise",  "encoder_channels",
    "kernel_size",     "conv_stride",       "nsvae_shared_trunk", "frame_len",
    "hop",             "snrs",              "learning_rate",     "batch_size",
    "epochs_pretrain", "epochs_joint",      "epochs_baseline",   "seed",
    "adam_beta1",      "adam_beta2",        "adam_eps",          "grad_clip_norm",
    "freeze_pretrained", "ratio_gradient", "synth_utterances", "synth_utterance_seconds", "synth_noise_seconds", "synth_pairing"};

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning_rate must be positive");
  require(batch_size > 0, ErrorCode::kInvalidArgument, "batch_size must be positive");
  require(epochs_pretrain >= 0 && epochs_joint >= 0 && epochs_baseline >= 0,
          ErrorCode::kInvalidArgument, "epoch counts must be non-negative");
  require(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0,
          ErrorCode::kInvalidArgument, "adam betas must lie in (0, 1)");
  require(adam_eps > 0.0, ErrorCode::kInvalidArgument, "adam_eps must be positive");
  require(grad_clip_norm > 0.0, ErrorCode::kInvalidArgument, "grad_clip_norm must be positive");
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.beta1 = adam_beta1;
  a.beta2 = adam_beta2;
  a.eps = adam_eps;
  a.grad_clip_norm = grad_clip_norm;
  a.round_to_float = true;
  return a;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  require(framing.frame_len > 0 && framing.frame_len % 2 == 0 && framing.hop > 0 &&
              framing.hop <= framing.frame_len,
          ErrorCode::kInvalidArgument, "invalid framing");
  require(model.freq_bins == framing.bins(), ErrorCode::kInvalidArgument,
          "freq_bins must equal frame_len/2 + 1");
  require(!snrs.empty(), ErrorCode::kInvalidArgument, "snrs must not be empty");
  require(synth.utterances > 0 && synth.utterance_seconds > 0.0 && synth.noise_seconds > 0.0,
          ErrorCode::kInvalidArgument, "invalid synth settings");
}

void set_config_value(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "freq_bins") c.model.freq_bins = parse_int<int>(key, v);
  else if (key == "latent_dim_speech") c.model.latent_dim_speech = parse_int<int>(key, v);
  else if (key == "latent_dim_noise") c.model.latent_dim_noise = parse_int<int>(key, v);
  else if (key == "encoder_channels") c.model.encoder_channels = parse_list<int>(key, v, parse_int<int>);
  else if (key == "kernel_size") c.model.kernel_size = parse_int<int>(key, v);
  else if (key == "conv_stride") c.model.conv_stride = parse_int<int>(key, v);
  else if (key == "nsvae_shared_trunk") c.model.nsvae_shared_trunk = parse_bool(key, v);
  else if (key == "frame_len") c.framing.frame_len = parse_int<int>(key, v);
  else if (key == "hop") c.framing.hop = parse_int<int>(key, v);
  else if (key == "snrs") c.snrs = parse_list<double>(key, v, parse_real);
  else if (key == "learning_rate") c.train.learning_rate = parse_real(key, v);
  else if (key == "batch_size") c.train.batch_size = parse_int<int>(key, v);
  else if (key == "epochs_pretrain") c.train.epochs_pretrain = parse_int<int>(key, v);
  else if (key == "epochs_joint") c.train.epochs_joint = parse_int<int>(key, v);
  else if (key == "epochs_baseline") c.train.epochs_baseline = parse_int<int>(key, v);
  else if (key == "seed") c.train.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "adam_beta1") c.train.adam_beta1 = parse_real(key, v);
  else if (key == "adam_beta2") c.train.adam_beta2 = parse_real(key, v);
  else if (key == "adam_eps") c.train.adam_eps = parse_real(key, v);
  else if (key == "grad_clip_norm") c.train.grad_clip_norm = parse_real(key, v);
  else if (key == "freeze_pretrained") c.train.freeze_pretrained = parse_bool(key, v);
  else if (key == "ratio_gradient") c.train.ratio_gradient = parse_ratio_gradient(std::string(v));
  else if (key == "synth_utterances") c.synth.utterances = parse_int<int>(key, v);
  else if (key == "synth_utterance_seconds") c.synth.utterance_seconds = parse_real(key, v);
  else if (key == "synth_noise_seconds") c.synth.noise_seconds = parse_real(key, v);
  else if (key == "synth_pairing") {
    if (v != "cartesian" && v != "round_robin") bad_value(key, v);
    c.synth.pairing = std::string(v);
  }
  else throw Error(ErrorCode::kInvalidArgument, "unknown config key: " + std::string(key));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    require(eq != std::string_view::npos, ErrorCode::kInvalidArgument,
            "config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(base, trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  base.validate();
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      std::move(base));
}

std::vector<std::string> config_keys() { return kKeys; }

}  // namespace pvae
