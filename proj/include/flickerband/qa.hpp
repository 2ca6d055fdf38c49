#pragma once

// Joins spectral estimates against manifest ground truth.

#include <algorithm>
#include <iomanip>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flickerband/dataset.hpp"
#include "flickerband/estimator.hpp"

namespace flickerband {

struct QaRow {
  std::string id;
  std::optional<BandingEstimate> estimate;  ///< empty when no banding was detected
  std::string error;                        ///< per-record failure, empty otherwise
  double theta = 0.0, period = 0.0, duty = 0.0;
  double theta_err = 0.0;   ///< radians, modulo a half turn
  double period_err = 0.0;  ///< relative
  double duty_err = 0.0;
};

struct ErrorStats {
  double median = 0.0;
  double p95 = 0.0;
  int count = 0;
};

struct QaSummary {
  std::vector<QaRow> rows;
  ErrorStats theta, period, duty;
  int detected = 0;
  int not_detected = 0;
  int failed = 0;
};

/// Absolute orientation difference for undirected stripes, in [0, pi/2].
inline double angle_error(double a, double b) noexcept {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

/// Nearest-rank percentile of an unsorted sample.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ErrorStats error_stats(const std::vector<double>& v) {
  return {percentile(v, 0.5), percentile(v, 0.95), static_cast<int>(v.size())};
}

inline QaRow qa_record(const PairRecord& rec, const RgbImage& lq, const EstimatorOptions& opt) {
  QaRow row;
  row.id = rec.id;
  row.theta = rec.params.theta;
  row.period = rec.params.period();
  row.duty = rec.params.width_w / rec.params.period();
  row.estimate = try_estimate_banding(lq, opt);
  if (row.estimate) {
    row.theta_err = angle_error(row.estimate->theta_hat, row.theta);
    row.period_err = std::abs(row.estimate->period_hat - row.period) / row.period;
    row.duty_err = std::abs(row.estimate->duty_hat - row.duty);
  }
  return row;
}

/// Estimates every record's LQ image (or HQ when use_hq is set, for
/// false-positive audits). Per-record failures are recorded and skipped.
inline QaSummary qa_manifest(const Manifest& manifest, const EstimatorOptions& opt = {}, bool use_hq = false) {
  if (manifest.records.empty()) throw std::invalid_argument("qa_manifest: empty manifest");
  QaSummary s;
  std::vector<double> te, pe, de;
  for (const auto& rec : manifest.records) {
    QaRow row;
    try {
      const RgbImage img = read_rgb(manifest.base_dir / (use_hq ? rec.hq_path : rec.lq_path));
      row = qa_record(rec, img, opt);
    } catch (const std::exception& e) {
      row.id = rec.id;
      row.error = e.what();
      ++s.failed;
      s.rows.push_back(row);
      continue;
    }
    if (row.estimate) {
      ++s.detected;
      te.push_back(row.theta_err);
      pe.push_back(row.period_err);
      de.push_back(row.duty_err);
    } else {
      ++s.not_detected;
    }
    s.rows.push_back(std::move(row));
  }
  s.theta = error_stats(te);
  s.period = error_stats(pe);
  s.duty = error_stats(de);
  return s;
}

inline std::string qa_csv(const QaSummary& s) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "id,status,theta,theta_hat,theta_err_deg,period,period_hat,period_rel_err,duty,duty_hat,duty_err,confidence\n";
  for (const auto& r : s.rows) {
    out << r.id << ",";
    if (!r.error.empty()) {
      out << "error,,,,,,,,,,\n";
      continue;
    }
    if (!r.estimate) {
      out << "no_banding," << r.theta << ",,," << r.period << ",,," << r.duty << ",,,\n";
      continue;
    }
    const auto& e = *r.estimate;
    out << "ok," << r.theta << "," << e.theta_hat << "," << r.theta_err * 180.0 / std::numbers::pi << ","
        << r.period << "," << e.period_hat << "," << r.period_err << "," << r.duty << "," << e.duty_hat << ","
        << r.duty_err << "," << e.confidence << "\n";
  }
  return out.str();
}

}  // namespace flickerband
