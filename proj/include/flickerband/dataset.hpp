#pragma once

// Paired LQ/HQ dataset synthesis: parameter ranges, batch generation over a
// source corpus, the line-delimited manifest, and per-record verification.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "flickerband/degradation.hpp"
#include "flickerband/io.hpp"
#include "flickerband/rng.hpp"
#include "flickerband/serialize.hpp"

namespace flickerband {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Range {
  double lo = 0.0, hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

enum class PatchMode { center, random };

/// Sampling intervals for every BandingParams scalar. Spacing and width
/// jitter are expressed as fractions of the sampled gap and width. The
/// defaults are tuning choices for visual variety, not measured values.
struct ParamRanges {
  std::uint64_t master_seed = 0;
  int records_per_source = 1;
  PatchMode patch_mode = PatchMode::center;
  int patch_size = 512;
  std::string source_tag = "corpus";

  Range theta{-0.26, 0.26};
  Range width{6.0, 60.0};
  Range gap{10.0, 120.0};
  Range sigma_theta{0.0, 0.02};
  Range delta_g_frac{0.0, 0.2};
  Range delta_w_frac{0.0, 0.2};
  Range delta_edge{0.0, 3.0};
  Range edge_corr_len{16.0, 64.0};
  Range feather{1.0, 4.0};
  Range v_y{0.2, 0.9};
  Range noise_alpha{0.0, 0.02};
  Range noise_sigma_r{0.0, 0.03};

  bool angle_jitter = true;
  bool spacing_jitter = true;
  bool width_jitter = true;
  bool edge_jitter = true;

  friend bool operator==(const ParamRanges&, const ParamRanges&) = default;
};

namespace detail {

struct RangeField {
  const char* key;
  Range ParamRanges::*member;
};

inline constexpr RangeField kRangeFields[] = {
    {"theta", &ParamRanges::theta},
    {"width", &ParamRanges::width},
    {"gap", &ParamRanges::gap},
    {"sigma_theta", &ParamRanges::sigma_theta},
    {"delta_g_frac", &ParamRanges::delta_g_frac},
    {"delta_w_frac", &ParamRanges::delta_w_frac},
    {"delta_edge", &ParamRanges::delta_edge},
    {"edge_corr_len", &ParamRanges::edge_corr_len},
    {"feather", &ParamRanges::feather},
    {"v_y", &ParamRanges::v_y},
    {"noise_alpha", &ParamRanges::noise_alpha},
    {"noise_sigma_r", &ParamRanges::noise_sigma_r},
};

struct FlagField {
  const char* key;
  bool ParamRanges::*member;
};

inline constexpr FlagField kFlagFields[] = {
    {"angle_jitter", &ParamRanges::angle_jitter},
    {"spacing_jitter", &ParamRanges::spacing_jitter},
    {"width_jitter", &ParamRanges::width_jitter},
    {"edge_jitter", &ParamRanges::edge_jitter},
};

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline void validate(const ParamRanges& r) {
  auto fail = [](const std::string& m) { throw ConfigError("ParamRanges: " + m); };
  for (const auto& f : detail::kRangeFields) {
    const Range& v = r.*f.member;
    if (!std::isfinite(v.lo) || !std::isfinite(v.hi)) fail(std::string(f.key) + " is not finite");
    if (v.lo > v.hi) fail(std::string(f.key) + ": lo > hi");
    if (v.lo < 0.0 && f.member != &ParamRanges::theta) fail(std::string(f.key) + " must be >= 0");
  }
  if (r.theta.lo < -std::numbers::pi || r.theta.hi >= std::numbers::pi) fail("theta must lie in [-pi, pi)");
  if (r.width.lo <= 0.0) fail("width must be > 0");
  if (r.gap.lo <= 0.0) fail("gap must be > 0");
  if (r.v_y.lo <= 0.0 || r.v_y.hi > 1.0) fail("v_y must lie in (0, 1]");
  if (r.edge_corr_len.lo < 1.0) fail("edge_corr_len must be >= 1");
  if (r.spacing_jitter && r.delta_g_frac.lo >= 1.0) fail("infeasible: delta_g_frac >= 1 for all draws");
  if (r.width_jitter && r.delta_w_frac.lo >= 1.0) fail("infeasible: delta_w_frac >= 1 for all draws");
  if (r.records_per_source < 1) fail("records_per_source must be >= 1");
  if (r.patch_size < 1) fail("patch_size must be >= 1");
}

/// Key/value text: `key = lo hi` for ranges (a single value means [v, v]),
/// `key = true|false` for flags, `#` starts a comment.
inline ParamRanges parse_ranges(const std::string& text) {
  ParamRanges r;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto bad = [&] { return ConfigError("config line " + std::to_string(lineno) + ": bad value for " + key); };
    std::istringstream vs(value);

    bool handled = false;
    for (const auto& f : detail::kRangeFields) {
      if (key != f.key) continue;
      Range v;
      if (!(vs >> v.lo)) throw bad();
      if (!(vs >> v.hi)) v.hi = v.lo;
      std::string rest;
      if (vs >> rest) throw bad();
      r.*f.member = v;
      handled = true;
    }
    for (const auto& f : detail::kFlagFields) {
      if (key != f.key) continue;
      if (value == "true") r.*f.member = true;
      else if (value == "false") r.*f.member = false;
      else throw bad();
      handled = true;
    }
    if (handled) continue;
    if (key == "master_seed") {
      try {
        std::size_t used = 0;
        r.master_seed = std::stoull(value, &used);
        if (used != value.size()) throw bad();
      } catch (const std::logic_error&) {
        throw bad();
      }
    } else if (key == "records_per_source") {
      if (!(vs >> r.records_per_source)) throw bad();
    } else if (key == "patch_size") {
      if (!(vs >> r.patch_size)) throw bad();
    } else if (key == "patch_mode") {
      if (value == "center") r.patch_mode = PatchMode::center;
      else if (value == "random") r.patch_mode = PatchMode::random;
      else throw bad();
    } else if (key == "source_tag") {
      r.source_tag = value;
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key " + key);
    }
  }
  validate(r);
  return r;
}

inline std::string serialize_ranges(const ParamRanges& r) {
  std::ostringstream out;
  out << "# flickerband parameter ranges\n";
  out << "master_seed = " << r.master_seed << "\n";
  out << "records_per_source = " << r.records_per_source << "\n";
  out << "patch_mode = " << (r.patch_mode == PatchMode::center ? "center" : "random") << "\n";
  out << "patch_size = " << r.patch_size << "\n";
  out << "source_tag = " << r.source_tag << "\n";
  for (const auto& f : detail::kRangeFields) {
    const Range& v = r.*f.member;
    out << f.key << " = " << detail::format_double(v.lo) << " " << detail::format_double(v.hi) << "\n";
  }
  for (const auto& f : detail::kFlagFields) out << f.key << " = " << (r.*f.member ? "true" : "false") << "\n";
  return out.str();
}

/// Draws one realization. Phase is uniform over one sampled period.
inline BandingParams sample_params(const ParamRanges& r, Rng& rng) {
  validate(r);
  constexpr int kMaxAttempts = 100;
  auto draw = [&rng](Range v) { return rng.uniform(v.lo, v.hi); };
  BandingParams p;
  p.theta = draw(r.theta);
  p.width_w = draw(r.width);
  p.gap_g = draw(r.gap);
  p.phase_phi = rng.uniform(0.0, p.period());
  p.sigma_theta = draw(r.sigma_theta);

  auto draw_frac = [&](Range v, const char* what) {
    for (int i = 0; i < kMaxAttempts; ++i)
      if (const double f = draw(v); f < 1.0) return f;
    throw ConfigError(std::string("infeasible ranges: ") + what + " >= 1 in 100 draws");
  };
  p.delta_g = draw_frac(r.delta_g_frac, "delta_g_frac") * p.gap_g;
  p.delta_w = draw_frac(r.delta_w_frac, "delta_w_frac") * p.width_w;
  p.delta_edge = draw(r.delta_edge);
  p.edge_corr_len = draw(r.edge_corr_len);
  p.feather_px = draw(r.feather);
  p.v_y = draw(r.v_y);
  if (p.v_y <= 0.0) p.v_y = r.v_y.hi;
  p.noise_alpha = draw(r.noise_alpha);
  p.noise_sigma_r = draw(r.noise_sigma_r);
  p.seed = rng.next();

  if (!r.angle_jitter) p.sigma_theta = 0.0;
  if (!r.spacing_jitter) p.delta_g = 0.0;
  if (!r.width_jitter) p.delta_w = 0.0;
  if (!r.edge_jitter) p.delta_edge = 0.0;
  validate(p);
  return p;
}

/// Stable per-record stream derived from the master seed, the source file
/// name, and the replicate index, so adding files does not reshuffle others.
inline Rng record_rng(std::uint64_t master_seed, const std::string& source_name, int replicate) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : source_name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Rng(hash_combine(hash_combine(master_seed, h), static_cast<std::uint64_t>(replicate)));
}

struct PairRecord {
  std::string id;
  std::string hq_path;    ///< relative to the manifest directory
  std::string lq_path;
  std::string mask_path;
  BandingParams params;
  std::string trace_digest;
  std::string source_dataset;
  std::string source;     ///< source file name
  int width = 0, height = 0;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

inline nlohmann::ordered_json to_json(const PairRecord& r) {
  return {{"id", r.id},
          {"hq_path", r.hq_path},
          {"lq_path", r.lq_path},
          {"mask_path", r.mask_path},
          {"width", r.width},
          {"height", r.height},
          {"source_dataset", r.source_dataset},
          {"source", r.source},
          {"trace_digest", r.trace_digest},
          {"params", to_json(r.params)}};
}

inline PairRecord record_from_json(const nlohmann::json& j) {
  PairRecord r;
  r.id = j.at("id").get<std::string>();
  r.hq_path = j.at("hq_path").get<std::string>();
  r.lq_path = j.at("lq_path").get<std::string>();
  r.mask_path = j.at("mask_path").get<std::string>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.source_dataset = j.value("source_dataset", "");
  r.source = j.value("source", "");
  r.trace_digest = j.at("trace_digest").get<std::string>();
  r.params = params_from_json(j.at("params"));
  return r;
}

inline std::string serialize_manifest(const std::vector<PairRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<PairRecord> records;
};

inline Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  m.base_dir = path.parent_path();
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

struct SkippedFile {
  std::string file;
  std::string reason;
};

struct DatasetResult {
  std::vector<PairRecord> records;
  std::vector<SkippedFile> skipped;
};

struct DatasetOptions {
  bool patch = false;  ///< crop every output to ranges.patch_size square
  int workers = 1;
};

class EmptyCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthesizes one record from an already-quantized HQ image and writes its
/// three PNGs under out_dir.
inline PairRecord write_pair(const RgbImage& hq, const BandingParams& params, const std::string& id,
                             const std::filesystem::path& out_dir) {
  const DegradationOutput d = synthesize_lq(hq, params);
  PairRecord rec;
  rec.id = id;
  rec.hq_path = "hq/" + id + ".png";
  rec.lq_path = "lq/" + id + ".png";
  rec.mask_path = "mask/" + id + ".png";
  rec.params = params;
  rec.trace_digest = trace_digest(d.trace);
  rec.width = hq.width();
  rec.height = hq.height();
  write_png(out_dir / rec.hq_path, quantize(hq));
  write_png(out_dir / rec.lq_path, quantize(d.lq));
  write_png(out_dir / rec.mask_path, quantize(d.mask));
  return rec;
}

/// Output layout: {hq,lq,mask}/ID.png, manifest.jsonl, config.txt, skipped.log.
/// Output bytes do not depend on the worker count.
inline DatasetResult synthesize_dataset(const std::filesystem::path& src_dir,
                                        const std::filesystem::path& out_dir,
                                        const ParamRanges& ranges, const DatasetOptions& opt = {}) {
  namespace fs = std::filesystem;
  validate(ranges);
  if (!fs::is_directory(src_dir)) throw IoError("source directory not found: " + src_dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(src_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyCorpus("no files in " + src_dir.string());

  fs::create_directories(out_dir);
  struct Slot {
    std::vector<PairRecord> records;
    std::optional<SkippedFile> skipped;
  };
  std::vector<Slot> slots(files.size());

  auto process = [&](std::size_t i) {
    const fs::path& file = files[i];
    const std::string name = file.filename().string();
    Slot& slot = slots[i];
    try {
      const RgbImage src = read_rgb(file);
      if (opt.patch && (src.width() < ranges.patch_size || src.height() < ranges.patch_size)) {
        slot.skipped = SkippedFile{name, "smaller than patch size"};
        return;
      }
      for (int r = 0; r < ranges.records_per_source; ++r) {
        Rng rng = record_rng(ranges.master_seed, name, r);
        RgbImage hq = src;
        if (opt.patch) {
          const int s = ranges.patch_size;
          int x0 = (src.width() - s) / 2, y0 = (src.height() - s) / 2;
          if (ranges.patch_mode == PatchMode::random) {
            Rng crop_rng = rng.split(1);
            x0 = static_cast<int>(crop_rng.next() % static_cast<std::uint64_t>(src.width() - s + 1));
            y0 = static_cast<int>(crop_rng.next() % static_cast<std::uint64_t>(src.height() - s + 1));
          }
          hq = crop(src, x0, y0, s, s);
        }
        Rng param_rng = rng.split(0);
        const BandingParams params = sample_params(ranges, param_rng);
        std::ostringstream id;
        id << file.stem().string() << "-" << std::setw(2) << std::setfill('0') << r;
        PairRecord rec = write_pair(hq, params, id.str(), out_dir);
        rec.source_dataset = ranges.source_tag;
        rec.source = name;
        slot.records.push_back(std::move(rec));
      }
    } catch (const IoError& e) {
      slot.records.clear();
      slot.skipped = SkippedFile{name, e.what()};
    }
  };

  const int workers = std::max(1, opt.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < files.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < files.size();) {
          try {
            process(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  DatasetResult result;
  std::string skip_log;
  for (auto& s : slots) {
    for (auto& r : s.records) result.records.push_back(std::move(r));
    if (s.skipped) {
      skip_log += s.skipped->file + "\t" + s.skipped->reason + "\n";
      result.skipped.push_back(std::move(*s.skipped));
    }
  }
  if (result.records.empty()) throw EmptyCorpus("no decodable images in " + src_dir.string());
  atomic_write(out_dir / "config.txt", serialize_ranges(ranges));
  atomic_write(out_dir / "skipped.log", skip_log);
  atomic_write(out_dir / "manifest.jsonl", serialize_manifest(result.records));
  return result;
}

struct VerifyReport {
  bool pass = false;
  std::string check;   ///< failing check, empty on pass
  std::string detail;
};

namespace detail {

inline std::optional<std::string> first_difference(const Image8& expected, const Image8& actual) {
  if (expected.width != actual.width || expected.height != actual.height || expected.channels != actual.channels)
    return "shape differs";
  for (std::size_t i = 0; i < expected.pixels.size(); ++i)
    if (expected.pixels[i] != actual.pixels[i]) {
      const std::size_t px = i / expected.channels;
      std::ostringstream ss;
      ss << "first difference at x=" << px % expected.width << " y=" << px / expected.width
         << " channel=" << i % expected.channels << " expected=" << int(expected.pixels[i])
         << " actual=" << int(actual.pixels[i]);
      return ss.str();
    }
  return std::nullopt;
}

}  // namespace detail

/// Re-synthesizes the pair from (HQ, params) and compares bit-exactly after quantization.
inline VerifyReport verify_pair(const PairRecord& rec, const std::filesystem::path& base_dir) {
  auto fail = [](std::string check, std::string detail) { return VerifyReport{false, std::move(check), std::move(detail)}; };
  Image8 hq8, lq8, mask8;
  try {
    hq8 = read_png(base_dir / rec.hq_path);
    lq8 = read_png(base_dir / rec.lq_path);
    mask8 = read_png(base_dir / rec.mask_path);
  } catch (const IoError& e) {
    return fail("files", e.what());
  }
  if (hq8.width != lq8.width || hq8.height != lq8.height || hq8.width != mask8.width ||
      hq8.height != mask8.height || hq8.width != rec.width || hq8.height != rec.height)
    return fail("dimensions", "hq, lq, mask and record dimensions disagree");
  if (mask8.channels != 1) return fail("mask", "mask is not single-channel");

  const RgbImage hq = to_rgb(hq8);
  DegradationOutput d;
  try {
    d = synthesize_lq(hq, rec.params);
  } catch (const std::invalid_argument& e) {
    return fail("params", e.what());
  }
  if (const std::string digest = trace_digest(d.trace); digest != rec.trace_digest)
    return fail("trace_digest", "expected " + digest + ", record has " + rec.trace_digest);
  if (auto diff = detail::first_difference(quantize(d.mask), mask8)) return fail("mask", *diff);
  if (auto diff = detail::first_difference(quantize(d.lq), lq8)) return fail("lq", *diff);
  return {true, "", ""};
}

}  // namespace flickerband
