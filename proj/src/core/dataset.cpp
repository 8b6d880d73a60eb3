#include "core/dataset.hpp"

#include "core/error.hpp"

namespace pvae {

TripletBatch FrameDataset::batch(std::span<const int> indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  TripletBatch b;
  b.y.resize(bins(), n);
  b.x.resize(bins(), n);
  b.d.resize(bins(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = indices[static_cast<std::size_t>(j)];
    require(i >= 0 && i < size(), ErrorCode::kInvalidArgument, "frame index out of range");
    b.y.col(j) = y.col(i);
    b.x.col(j) = x.col(i);
    b.d.col(j) = d.col(i);
  }
  b.y = norms.y.normalize(b.y);
  b.x = norms.x.normalize(b.x);
  b.d = norms.d.normalize(b.d);
  return b;
}

TripletBatch FrameDataset::all() const {
  return {norms.y.normalize(y), norms.x.normalize(x), norms.d.normalize(d)};
}

FeatureNorm compute_norm(const Eigen::MatrixXd& frames) {
  require(frames.cols() > 0, ErrorCode::kEmptyCorpus, "empty corpus");
  FeatureNorm n;
  n.mean = frames.rowwise().mean();
  const Eigen::MatrixXd centered = frames.colwise() - n.mean;
  n.std = (centered.array().square().rowwise().sum() / static_cast<double>(frames.cols()))
              .sqrt()
              .max(kMinFeatureStd)
              .matrix();
  return n;
}

Waveform noise_segment(const Waveform& noise, std::size_t len, std::size_t index) {
  require(!noise.samples.empty(), ErrorCode::kEmptyCorpus, "empty corpus: empty noise file");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(len);
  const std::size_t n = noise.size();
  const std::size_t offset = n > len ? (index * 4001u) % (n - len + 1) : 0;
  for (std::size_t i = 0; i < len; ++i) out.samples[i] = noise.samples[(offset + i) % n];
  return out;
}

std::vector<MixtureExample> make_mixtures(const std::vector<Waveform>& clean,
                                          const std::vector<Waveform>& noise,
                                          const std::vector<double>& snrs) {
  require(!clean.empty() && !noise.empty() && !snrs.empty(), ErrorCode::kEmptyCorpus,
          "empty corpus");
  std::vector<MixtureExample> out;
  out.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    validate_pipeline_input(clean[i]);
    const Waveform& src = noise[i % noise.size()];
    validate_pipeline_input(src);
    const double snr = snrs[(i / noise.size()) % snrs.size()];
    out.push_back(mix_at_snr(clean[i], noise_segment(src, clean[i].size(), i), snr));
  }
  return out;
}

FrameDataset dataset_from_mixtures(const std::vector<MixtureExample>& mixtures,
                                   const Framing& framing) {
  require(!mixtures.empty(), ErrorCode::kEmptyCorpus, "empty corpus");
  std::vector<LpsFeatures> ly, lx, ld;
  Eigen::Index total = 0;
  for (const auto& m : mixtures) {
    ly.push_back(lps(stft(m.y, framing.frame_len, framing.hop)));
    lx.push_back(lps(stft(m.x, framing.frame_len, framing.hop)));
    ld.push_back(lps(stft(m.d, framing.frame_len, framing.hop)));
    total += ly.back().num_frames();
  }
  FrameDataset ds;
  ds.framing = framing;
  const int bins = framing.bins();
  ds.y.resize(bins, total);
  ds.x.resize(bins, total);
  ds.d.resize(bins, total);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < ly.size(); ++i) {
    const Eigen::Index n = ly[i].num_frames();
    ds.y.middleCols(col, n) = ly[i].values;
    ds.x.middleCols(col, n) = lx[i].values;
    ds.d.middleCols(col, n) = ld[i].values;
    col += n;
  }
  ds.norms.y = compute_norm(ds.y);
  ds.norms.x = compute_norm(ds.x);
  ds.norms.d = compute_norm(ds.d);
  return ds;
}

FrameDataset build_dataset(const std::vector<Waveform>& clean, const std::vector<Waveform>& noise,
                           const std::vector<double>& snrs, const Framing& framing) {
  return dataset_from_mixtures(make_mixtures(clean, noise, snrs), framing);
}

}  // namespace pvae
