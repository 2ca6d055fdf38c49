// flickerband command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation/QA failure.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "flickerband/dataset.hpp"
#include "flickerband/estimator.hpp"
#include "flickerband/qa.hpp"
#include "flickerband/report.hpp"
#include "flickerband/serialize.hpp"

namespace fs = std::filesystem;
using namespace flickerband;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kIo = 2;
constexpr int kValidation = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool json = false;
  int verbosity = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "ParamRanges config file (key = lo hi)");
  cmd->add_option("--seed", c.seed, "Seed override (U64)");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--json", c.json, "Machine-readable output");
  cmd->add_flag("-v,--verbose", c.verbosity, "More diagnostics on stderr");
}

ParamRanges load_ranges(const Common& c) {
  ParamRanges r;
  if (!c.config.empty()) r = parse_ranges(read_file(c.config));
  if (c.seed) r.master_seed = *c.seed;
  return r;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& t : pool) t.join();
}

nlohmann::ordered_json estimate_json(const BandingEstimate& e) {
  return {{"detected", true},          {"theta_hat", e.theta_hat},   {"period_hat", e.period_hat},
          {"duty_hat", e.duty_hat},    {"width_hat", e.width_hat()}, {"gap_hat", e.gap_hat()},
          {"confidence", e.confidence}, {"prominence", e.prominence}};
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string input, prefix, params;
  std::optional<double> feather;
};

int cmd_simulate(const SimulateArgs& a) {
  require_file(a.input, "input image");
  BandingParams p;
  if (!a.params.empty()) {
    require_file(a.params, "params file");
    const std::string text = read_file(a.params);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidParams(std::string("params file is not valid JSON: ") + e.what());
    }
    if (j.is_object()) j.erase("trace_digest");  // tolerate sidecars written by simulate
    p = params_from_json(j);
    if (a.common.seed) p.seed = *a.common.seed;
  } else {
    const ParamRanges r = load_ranges(a.common);
    Rng rng = record_rng(r.master_seed, fs::path(a.input).filename().string(), 0).split(0);
    p = sample_params(r, rng);
  }
  if (a.feather) p.feather_px = *a.feather;
  validate(p);

  // Everything is computed before the first write, so a failure leaves no files.
  const RgbImage hq = read_rgb(a.input);
  const DegradationOutput d = synthesize_lq(hq, p);
  const std::string lq_png = encode_png(quantize(d.lq));
  const std::string mask_png = encode_png(quantize(d.mask));
  nlohmann::ordered_json sidecar = to_json(p);
  sidecar["trace_digest"] = trace_digest(d.trace);
  const std::string params_text = sidecar.dump(2) + "\n";

  atomic_write(a.prefix + ".lq.png", lq_png);
  atomic_write(a.prefix + ".mask.png", mask_png);
  atomic_write(a.prefix + ".params", params_text);
  if (a.common.json) {
    std::cout << nlohmann::ordered_json{{"lq", a.prefix + ".lq.png"},
                                        {"mask", a.prefix + ".mask.png"},
                                        {"params", a.prefix + ".params"},
                                        {"mask_coverage", mask_coverage(d.mask)}}
                     .dump()
              << "\n";
  } else {
    std::cout << "wrote " << a.prefix << ".{lq.png,mask.png,params} (mask coverage "
              << mask_coverage(d.mask) << ")\n";
  }
  return kOk;
}

// --- batch ------------------------------------------------------------------

struct BatchArgs {
  Common common;
  std::string src, out;
  bool patch = false;
  std::optional<double> feather;
};

int cmd_batch(const BatchArgs& a) {
  ParamRanges r = load_ranges(a.common);
  if (a.feather) r.feather = {*a.feather, *a.feather};
  const DatasetResult res = synthesize_dataset(a.src, a.out, r, {.patch = a.patch, .workers = a.common.workers});
  if (a.common.json) {
    std::cout << nlohmann::ordered_json{{"records", res.records.size()},
                                        {"skipped", res.skipped.size()},
                                        {"manifest", (fs::path(a.out) / "manifest.jsonl").string()}}
                     .dump()
              << "\n";
  } else {
    std::cout << res.records.size() << " records, " << res.skipped.size() << " skipped -> "
              << (fs::path(a.out) / "manifest.jsonl").string() << "\n";
  }
  for (const auto& s : res.skipped) std::cerr << "skipped " << s.file << ": " << s.reason << "\n";
  return kOk;
}

// --- estimate ---------------------------------------------------------------

struct EstimateArgs {
  Common common;
  std::string image, manifest, csv;
  double threshold = 6.0;
  std::string window = "hann";
  bool use_hq = false;
};

int cmd_estimate(const EstimateArgs& a) {
  EstimatorOptions opt;
  opt.peak_threshold = a.threshold;
  if (a.window != "hann" && a.window != "none") throw UsageError("--window must be hann or none");
  opt.hann_window = a.window == "hann";

  if (!a.manifest.empty()) {
    require_file(a.manifest, "manifest");
    const Manifest m = read_manifest(a.manifest);
    const QaSummary s = qa_manifest(m, opt, a.use_hq);
    const std::string csv = qa_csv(s);
    if (!a.csv.empty()) atomic_write(a.csv, csv);
    for (const auto& row : s.rows)
      if (!row.error.empty()) std::cerr << row.id << ": " << row.error << "\n";
    if (a.common.json) {
      auto stats = [](const ErrorStats& e) { return nlohmann::ordered_json{{"median", e.median}, {"p95", e.p95}}; };
      std::cout << nlohmann::ordered_json{{"records", s.rows.size()},
                                          {"detected", s.detected},
                                          {"not_detected", s.not_detected},
                                          {"failed", s.failed},
                                          {"theta_err_rad", stats(s.theta)},
                                          {"period_rel_err", stats(s.period)},
                                          {"duty_err", stats(s.duty)}}
                       .dump()
                << "\n";
    } else if (a.csv.empty()) {
      std::cout << csv;
    } else {
      std::cout << s.detected << " detected, " << s.not_detected << " not detected, " << s.failed
                << " failed; median period error " << s.period.median << "\n";
    }
    return s.failed > 0 ? kValidation : kOk;
  }

  if (a.image.empty()) throw UsageError("estimate needs an image path or --manifest");
  require_file(a.image, "image");
  const RgbImage img = read_rgb(a.image);
  try {
    const BandingEstimate e = estimate_banding(img, opt);
    if (a.common.json) {
      std::cout << estimate_json(e).dump() << "\n";
    } else {
      std::cout << std::setprecision(6) << "theta " << e.theta_hat << " rad, period " << e.period_hat
                << " px, duty " << e.duty_hat << " (width " << e.width_hat() << ", gap " << e.gap_hat()
                << "), confidence " << e.confidence << "\n";
    }
    return kOk;
  } catch (const NoBandingDetected& e) {
    if (a.common.json)
      std::cout << nlohmann::ordered_json{{"detected", false}, {"prominence", e.prominence}}.dump() << "\n";
    else
      std::cout << "no banding detected (best prominence " << e.prominence << ")\n";
    return kValidation;
  }
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string manifest, pred, gt, mask, dist, out;
  MaskedLossWeights w;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::vector<EvalPair> pairs;
  if (!a.manifest.empty()) {
    require_file(a.manifest, "manifest");
    pairs = pairs_from_manifest(read_manifest(a.manifest), a.pred);
  } else {
    if (a.pred.empty() || a.gt.empty() || a.mask.empty())
      throw UsageError("evaluate needs --manifest or all of --pred, --gt, --mask");
    for (const auto& d : {a.pred, a.gt, a.mask})
      if (!fs::is_directory(d)) throw IoError("directory not found: " + d);
    pairs = pairs_from_dirs(a.pred, a.gt, a.mask);
  }
  std::optional<PrecomputedDistances> pre;
  if (!a.dist.empty()) pre.emplace(a.dist);
  const MetricReport rep = evaluate(pairs, a.w, pre ? &*pre : nullptr);
  if (!a.out.empty()) {
    atomic_write(a.out + ".jsonl", report_jsonl(rep));
    atomic_write(a.out + ".csv", report_csv(rep));
  }
  if (a.common.json) {
    std::cout << report_jsonl(rep);
  } else {
    std::cout << report_csv(rep);
  }
  return kOk;
}

// --- verify -----------------------------------------------------------------

struct VerifyArgs {
  Common common;
  std::string manifest;
};

int cmd_verify(const VerifyArgs& a) {
  require_file(a.manifest, "manifest");
  const Manifest m = read_manifest(a.manifest);
  std::vector<VerifyReport> reports(m.records.size());
  parallel_for(m.records.size(), a.common.workers,
               [&](std::size_t i) { reports[i] = verify_pair(m.records[i], m.base_dir); });
  int failed = 0;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.pass) {
      ++failed;
      if (!a.common.json) std::cout << "FAIL " << m.records[i].id << " [" << r.check << "] " << r.detail << "\n";
    }
    arr.push_back({{"id", m.records[i].id}, {"pass", r.pass}, {"check", r.check}, {"detail", r.detail}});
  }
  if (a.common.json) {
    std::cout << nlohmann::ordered_json{{"records", reports.size()}, {"failed", failed}, {"results", arr}}.dump()
              << "\n";
  } else if (failed == 0) {
    std::cout << "all pass (" << reports.size() << " records)\n";
  } else {
    std::cout << failed << " of " << reports.size() << " records failed\n";
  }
  return failed == 0 ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flicker-banding simulation, estimation and evaluation"};
  app.require_subcommand(1, 1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Degrade one image: writes PREFIX.lq.png, PREFIX.mask.png, PREFIX.params");
  s->add_option("input", sim.input, "Clean input PNG")->required();
  s->add_option("prefix", sim.prefix, "Output path prefix")->required();
  s->add_option("--params", sim.params, "BandingParams JSON (otherwise sampled from --config ranges)");
  s->add_option("--feather", sim.feather, "Feather half-width override (px)")->check(CLI::NonNegativeNumber);
  add_common(s, sim.common);

  BatchArgs batch;
  auto* b = app.add_subcommand("batch", "Synthesize a paired dataset from a directory of PNGs");
  b->add_option("src", batch.src, "Source image directory")->required();
  b->add_option("out", batch.out, "Output directory")->required();
  b->add_flag("--patch-512", batch.patch, "Crop every record to a 512x512 patch");
  b->add_option("--feather", batch.feather, "Fix the feather half-width (px)")->check(CLI::NonNegativeNumber);
  add_common(b, batch.common);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate banding angle, period and duty cycle");
  e->add_option("image", est.image, "Image to analyse");
  e->add_option("--manifest", est.manifest, "Run QA over a manifest instead of one image");
  e->add_option("--csv", est.csv, "Write the QA table here (with --manifest)");
  e->add_flag("--use-hq", est.use_hq, "QA the HQ images (false-positive audit)");
  e->add_option("--peak-threshold", est.threshold, "Minimum peak prominence")->check(CLI::PositiveNumber);
  e->add_option("--window", est.window, "Spectral window: hann or none");
  add_common(e, est.common);

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Score restorations against ground truth");
  v->add_option("--manifest", ev.manifest, "Manifest; predictions default to its LQ images");
  v->add_option("--pred", ev.pred, "Prediction directory (ID.png)");
  v->add_option("--gt", ev.gt, "Ground-truth directory");
  v->add_option("--mask", ev.mask, "Mask directory");
  v->add_option("--dist-dir", ev.dist, "Precomputed distance maps (ID.pfm or ID.png)");
  v->add_option("--out", ev.out, "Write OUT.jsonl and OUT.csv");
  v->add_option("--lambda-banding", ev.w.lambda_banding)->check(CLI::Range(0.0, 1.0));
  v->add_option("--lambda-pixel", ev.w.lambda_pixel)->check(CLI::NonNegativeNumber);
  v->add_option("--lambda-perceptual", ev.w.lambda_perceptual)->check(CLI::NonNegativeNumber);
  add_common(v, ev.common);

  VerifyArgs ver;
  auto* r = app.add_subcommand("verify", "Re-synthesize every record and compare bit-exactly");
  r->add_option("manifest", ver.manifest, "manifest.jsonl")->required();
  add_common(r, ver.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*b) return cmd_batch(batch);
    if (*e) return cmd_estimate(est);
    if (*v) return cmd_evaluate(ev);
    if (*r) return cmd_verify(ver);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsage;
  } catch (const IoError& err) {
    std::cerr << "I/O error: " << err.what() << "\n";
    return kIo;
  } catch (const EmptyCorpus& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "I/O error: " << err.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& err) {
    std::cerr << "invalid input: " << err.what() << "\n";
    return kValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
