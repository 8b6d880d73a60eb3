#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/dsp.hpp"

namespace pvae {

inline constexpr double kSiSdrCap = 300.0;

// Both signals are zero-meaned first. Returns kSiSdrCap when the residual
// vanishes (or the ratio exceeds the cap).
double si_sdr(const std::vector<double>& est, const std::vector<double>& ref);
double si_sdr(const Waveform& est, const Waveform& ref);

// Mean per-bin squared difference.
double lps_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
double lps_distance(const LpsFeatures& a, const LpsFeatures& b);
// One mean squared difference per frame (column).
Eigen::VectorXd frame_lps_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// 1.96 * sample sd / sqrt(n); 0 for n < 2.
double ci_half_width(const std::vector<double>& v);
double mean_of(const std::vector<double>& v);

struct ItemScore {
  double snr_db = 0.0;
  double noisy_sisdr = 0.0;
  double enh_sisdr = 0.0;
};

struct SnrRow {
  double snr_db = 0.0;
  int n = 0;
  double noisy_mean = 0.0;
  double noisy_ci = 0.0;
  double enh_mean = 0.0;
  double enh_ci = 0.0;
};

struct EvalReport {
  std::vector<ItemScore> items;  // corpus order
  std::vector<SnrRow> rows;      // ascending snr_db
};

using EnhanceFn = std::function<Waveform(const Waveform&)>;

// Scores are computed on the common prefix of the estimate and the reference,
// with the noisy baseline measured on the same prefix.
EvalReport evaluate_corpus(const EnhanceFn& enhance, const std::vector<MixtureExample>& corpus);
EvalReport aggregate_scores(std::vector<ItemScore> items);

// Tab-separated; the pesq / stoi columns are left empty.
std::string format_report(const EvalReport& r);

}  // namespace pvae
