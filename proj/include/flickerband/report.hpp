#pragma once

// Batch evaluation of restorations against ground truth.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flickerband/dataset.hpp"
#include "flickerband/io.hpp"
#include "flickerband/metrics.hpp"

namespace flickerband {

struct EvalPair {
  std::string id;
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::filesystem::path mask;
};

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double lpips_proxy = 0.0;  ///< unmasked mean of the distance map
  double masked_pixel = 0.0;
  double masked_perceptual = 0.0;
  double merged = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  ///< sorted by id
  MetricRow mean;               ///< arithmetic mean of rows, id "mean"
  std::string config_hash;
  std::string timestamp;        ///< empty unless requested
};

/// Evaluation pairs from a manifest; predictions default to the manifest's LQ
/// images, or pred_dir/ID.png when pred_dir is given.
inline std::vector<EvalPair> pairs_from_manifest(const Manifest& m, const std::filesystem::path& pred_dir = {}) {
  std::vector<EvalPair> out;
  for (const auto& r : m.records)
    out.push_back({r.id, pred_dir.empty() ? m.base_dir / r.lq_path : pred_dir / (r.id + ".png"),
                   m.base_dir / r.hq_path, m.base_dir / r.mask_path});
  return out;
}

/// Pairs matched by file name across three directories.
inline std::vector<EvalPair> pairs_from_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                             const std::filesystem::path& mask_dir) {
  namespace fs = std::filesystem;
  std::vector<EvalPair> out;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    const auto name = e.path().filename();
    out.push_back({e.path().stem().string(), pred_dir / name, e.path(), mask_dir / name});
  }
  return out;
}

/// Distance maps read from dir/ID.pfm or dir/ID.png (scaled to [0, 1]).
class PrecomputedDistances {
 public:
  explicit PrecomputedDistances(std::filesystem::path dir) : dir_(std::move(dir)) {}

  Tensor4 load(const std::string& id) const {
    Plane p;
    if (const auto pfm = dir_ / (id + ".pfm"); std::filesystem::exists(pfm)) p = read_pfm(pfm);
    else p = to_plane(read_png(dir_ / (id + ".png")));
    Tensor4 t(1, 1, p.height(), p.width());
    std::copy(p.values().begin(), p.values().end(), t.data.begin());
    return t;
  }

 private:
  std::filesystem::path dir_;
};

inline MetricRow evaluate_pair(const std::string& id, const RgbImage& pred, const RgbImage& gt,
                               const FlickerMask& mask, const DistanceProvider& dist,
                               const MaskedLossWeights& w) {
  const Tensor4 p = to_tensor(pred), g = to_tensor(gt), m = to_tensor(mask);
  MetricRow row;
  row.id = id;
  row.psnr = psnr(p, g);
  row.ssim = ssim(p, g);
  const Tensor4 d = dist(p, g);
  double sum = 0.0;
  for (double v : d.data) sum += v;
  row.lpips_proxy = d.data.empty() ? 0.0 : sum / static_cast<double>(d.data.size());
  const auto provided = [&d](const Tensor4&, const Tensor4&) { return d; };
  const MergedLoss ml = merged_loss_terms(p, g, m, provided, w);
  row.masked_pixel = ml.pixel_loss;
  row.masked_perceptual = ml.perceptual_loss;
  row.merged = ml.total;
  return row;
}

inline std::string hash_text(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

/// Rows are sorted by id; a missing precomputed map falls back to an error.
inline MetricReport evaluate(std::vector<EvalPair> pairs, const MaskedLossWeights& w,
                             const PrecomputedDistances* precomputed = nullptr) {
  validate(w);
  if (pairs.empty()) throw std::invalid_argument("evaluate: no pairs");
  std::sort(pairs.begin(), pairs.end(), [](const EvalPair& a, const EvalPair& b) { return a.id < b.id; });
  MetricReport rep;
  std::ostringstream cfg;
  cfg << std::setprecision(17) << w.lambda_banding << " " << w.lambda_pixel << " " << w.lambda_perceptual << " "
      << w.epsilon << " " << (precomputed ? "precomputed" : "gradient_proxy");
  rep.config_hash = hash_text(cfg.str());
  for (const auto& pr : pairs) {
    const RgbImage pred = read_rgb(pr.pred), gt = read_rgb(pr.gt);
    const FlickerMask mask = read_mask(pr.mask);
    if (!pred.same_shape(gt) || gt.width() != mask.width() || gt.height() != mask.height())
      throw std::invalid_argument("evaluate: shape mismatch for " + pr.id);
    DistanceProvider dist = gradient_proxy_provider();
    if (precomputed) {
      const Tensor4 d = precomputed->load(pr.id);
      dist = [d](const Tensor4&, const Tensor4&) { return d; };
    }
    rep.rows.push_back(evaluate_pair(pr.id, pred, gt, mask, dist, w));
  }
  MetricRow& m = rep.mean;
  m.id = "mean";
  for (const auto& r : rep.rows) {
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.lpips_proxy += r.lpips_proxy;
    m.masked_pixel += r.masked_pixel;
    m.masked_perceptual += r.masked_perceptual;
    m.merged += r.merged;
  }
  const double n = static_cast<double>(rep.rows.size());
  m.psnr /= n;
  m.ssim /= n;
  m.lpips_proxy /= n;
  m.masked_pixel /= n;
  m.masked_perceptual /= n;
  m.merged /= n;
  return rep;
}

inline nlohmann::ordered_json to_json(const MetricRow& r) {
  return {{"id", r.id},
          {"psnr", r.psnr},
          {"ssim", r.ssim},
          {"lpips_proxy", r.lpips_proxy},
          {"merged", r.merged},
          {"masked_pixel", r.masked_pixel},
          {"masked_perceptual", r.masked_perceptual}};
}

/// One JSON object per line: a metadata line, one line per pair, then the mean.
inline std::string report_jsonl(const MetricReport& rep) {
  nlohmann::ordered_json meta = {{"type", "meta"}, {"config_hash", rep.config_hash}, {"pairs", rep.rows.size()}};
  if (!rep.timestamp.empty()) meta["timestamp"] = rep.timestamp;
  std::string out = meta.dump() + "\n";
  for (const auto& r : rep.rows) {
    auto j = to_json(r);
    j["type"] = "pair";
    out += j.dump() + "\n";
  }
  auto j = to_json(rep.mean);
  j["type"] = "aggregate";
  out += j.dump() + "\n";
  return out;
}

inline std::string report_csv(const MetricReport& rep) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "id,psnr,ssim,lpips_proxy,merged,masked_pixel,masked_perceptual\n";
  auto line = [&out](const MetricRow& r) {
    out << r.id << "," << r.psnr << "," << r.ssim << "," << r.lpips_proxy << "," << r.merged << ","
        << r.masked_pixel << "," << r.masked_perceptual << "\n";
  };
  for (const auto& r : rep.rows) line(r);
  line(rep.mean);
  return out.str();
}

}  // namespace flickerband
