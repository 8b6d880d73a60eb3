#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "core/error.hpp"
#include "core/parallel.hpp"

namespace pvae {

double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  require(est.size() == ref.size(), ErrorCode::kShape, "shape error: si_sdr length mismatch");
  require(!ref.empty(), ErrorCode::kInvalidArgument, "undefined reference");
  const auto n = static_cast<Eigen::Index>(ref.size());
  Eigen::Map<const Eigen::VectorXd> e0(est.data(), n), r0(ref.data(), n);
  const Eigen::VectorXd e = e0.array() - e0.mean();
  const Eigen::VectorXd r = r0.array() - r0.mean();
  const double rr = r.squaredNorm();
  require(rr > 0.0, ErrorCode::kInvalidArgument, "undefined reference");
  const double alpha = e.dot(r) / rr;
  const Eigen::VectorXd target = alpha * r;
  const double num = target.squaredNorm();
  const double den = (target - e).squaredNorm();
  if (den == 0.0) return kSiSdrCap;
  if (num == 0.0) return -kSiSdrCap;
  return std::clamp(10.0 * std::log10(num / den), -kSiSdrCap, kSiSdrCap);
}

double si_sdr(const Waveform& est, const Waveform& ref) { return si_sdr(est.samples, ref.samples); }

double lps_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShape, "shape error");
  require(a.size() > 0, ErrorCode::kShape, "shape error: empty features");
  return (a - b).array().square().mean();
}

double lps_distance(const LpsFeatures& a, const LpsFeatures& b) {
  return lps_distance(a.values, b.values);
}

Eigen::VectorXd frame_lps_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShape, "shape error");
  return (a - b).array().square().colwise().mean().transpose();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double ci_half_width(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
}

EvalReport aggregate_scores(std::vector<ItemScore> items) {
  require(!items.empty(), ErrorCode::kEmptyCorpus, "empty corpus");
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& it : items) {
    groups[it.snr_db].first.push_back(it.noisy_sisdr);
    groups[it.snr_db].second.push_back(it.enh_sisdr);
  }
  EvalReport r;
  r.items = std::move(items);
  for (const auto& [snr, g] : groups) {
    SnrRow row;
    row.snr_db = snr;
    row.n = static_cast<int>(g.first.size());
    row.noisy_mean = mean_of(g.first);
    row.noisy_ci = ci_half_width(g.first);
    row.enh_mean = mean_of(g.second);
    row.enh_ci = ci_half_width(g.second);
    r.rows.push_back(row);
  }
  return r;
}

EvalReport evaluate_corpus(const EnhanceFn& enhance, const std::vector<MixtureExample>& corpus) {
  require(!corpus.empty(), ErrorCode::kEmptyCorpus, "empty corpus");
  std::vector<ItemScore> items(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    const MixtureExample& m = corpus[i];
    const Waveform est = enhance(m.y);
    const std::size_t len = std::min(est.size(), m.x.size());
    auto prefix = [len](const std::vector<double>& v) {
      return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(len));
    };
    const auto ref = prefix(m.x.samples);
    items[i].snr_db = m.snr_db;
    items[i].noisy_sisdr = si_sdr(prefix(m.y.samples), ref);
    items[i].enh_sisdr = si_sdr(prefix(est.samples), ref);
  });
  return aggregate_scores(std::move(items));
}

std::string format_report(const EvalReport& r) {
  std::string out = "snr_db\tn\tnoisy_sisdr\tci\tenh_sisdr\tci\tpesq\tstoi\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%g\t%d\t%.6f\t%.6f\t%.6f\t%.6f\t\t\n", row.snr_db, row.n,
                  row.noisy_mean, row.noisy_ci, row.enh_mean, row.enh_ci);
    out += buf;
  }
  return out;
}

}  // namespace pvae
