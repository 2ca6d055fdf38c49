#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "flickerband/dataset.hpp"
#include "test_content.hpp"

using namespace flickerband;
namespace fs = std::filesystem;

namespace {

void write_corpus(const fs::path& dir, int n, int w = 96, int h = 80) {
  for (int i = 0; i < n; ++i)
    write_png(dir / ("img" + std::to_string(i) + ".png"), quantize(fbtest::clean_content(w, h, 1000 + i)));
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

ParamRanges small_ranges() {
  ParamRanges r;
  r.master_seed = 5;
  r.width = {4, 12};
  r.gap = {6, 20};
  return r;
}

}  // namespace

TEST(ParamRanges, DegenerateRangesGiveConstants) {
  ParamRanges r;
  r.theta = {0.1, 0.1};
  r.width = {8, 8};
  r.gap = {12, 12};
  r.sigma_theta = {0.01, 0.01};
  r.delta_g_frac = {0.1, 0.1};
  r.delta_w_frac = {0.2, 0.2};
  r.delta_edge = {1, 1};
  r.edge_corr_len = {20, 20};
  r.feather = {2, 2};
  r.v_y = {0.4, 0.4};
  r.noise_alpha = {0.01, 0.01};
  r.noise_sigma_r = {0.02, 0.02};
  Rng rng(1);
  const BandingParams p = sample_params(r, rng);
  EXPECT_EQ(p.theta, 0.1);
  EXPECT_EQ(p.width_w, 8);
  EXPECT_EQ(p.gap_g, 12);
  EXPECT_EQ(p.sigma_theta, 0.01);
  EXPECT_DOUBLE_EQ(p.delta_g, 1.2);
  EXPECT_DOUBLE_EQ(p.delta_w, 1.6);
  EXPECT_EQ(p.delta_edge, 1);
  EXPECT_EQ(p.edge_corr_len, 20);
  EXPECT_EQ(p.feather_px, 2);
  EXPECT_EQ(p.v_y, 0.4);
  EXPECT_EQ(p.noise_alpha, 0.01);
  EXPECT_EQ(p.noise_sigma_r, 0.02);
  EXPECT_GE(p.phase_phi, 0.0);
  EXPECT_LT(p.phase_phi, 20.0);
}

TEST(ParamRanges, UniformMeanOfDarkening) {
  ParamRanges r;
  Rng rng(2);
  double s = 0;
  for (int i = 0; i < 10000; ++i) s += sample_params(r, rng).v_y;
  EXPECT_NEAR(s / 10000, 0.55, 0.02 * 0.55);
}

TEST(ParamRanges, SampledParamsAlwaysValid) {
  ParamRanges r;
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const BandingParams p = sample_params(r, rng);
    ASSERT_NO_THROW(validate(p));
    ASSERT_GE(p.theta, r.theta.lo);
    ASSERT_LE(p.theta, r.theta.hi);
    ASSERT_LT(p.phase_phi, p.period());
  }
}

TEST(ParamRanges, JitterFlagsDisableTerms) {
  ParamRanges r;
  r.angle_jitter = r.spacing_jitter = r.width_jitter = r.edge_jitter = false;
  Rng rng(4);
  const BandingParams p = sample_params(r, rng);
  EXPECT_EQ(p.sigma_theta, 0);
  EXPECT_EQ(p.delta_g, 0);
  EXPECT_EQ(p.delta_w, 0);
  EXPECT_EQ(p.delta_edge, 0);
}

TEST(ParamRanges, InfeasibleRangesRejected) {
  ParamRanges r;
  r.delta_g_frac = {1.0, 1.5};
  EXPECT_THROW(validate(r), ConfigError);
  r = {};
  r.width = {5, 4};
  EXPECT_THROW(validate(r), ConfigError);
  r = {};
  r.v_y = {0.0, 0.5};
  EXPECT_THROW(validate(r), ConfigError);
}

TEST(ParamRanges, RecordSeedStable) {
  ParamRanges r;
  Rng a = record_rng(7, "x.png", 3).split(0), b = record_rng(7, "x.png", 3).split(0);
  EXPECT_EQ(sample_params(r, a), sample_params(r, b));
  Rng c = record_rng(7, "y.png", 3).split(0);
  Rng d = record_rng(7, "x.png", 3).split(0);
  EXPECT_NE(sample_params(r, c), sample_params(r, d));
}

TEST(ConfigText, RoundTripAndErrors) {
  ParamRanges r = small_ranges();
  r.edge_jitter = false;
  r.patch_mode = PatchMode::random;
  r.records_per_source = 3;
  r.source_tag = "lsdir-like";
  EXPECT_EQ(parse_ranges(serialize_ranges(r)), r);
  const ParamRanges parsed = parse_ranges("# comment\nv_y = 0.3 0.6\n\nangle_jitter = false\nmaster_seed = 12\n");
  EXPECT_EQ(parsed.v_y, (Range{0.3, 0.6}));
  EXPECT_FALSE(parsed.angle_jitter);
  EXPECT_EQ(parsed.master_seed, 12u);
  EXPECT_THROW(parse_ranges("bogus = 1 2\n"), ConfigError);
  EXPECT_THROW(parse_ranges("v_y = 0.1 0.2 0.3\n"), ConfigError);
  EXPECT_THROW(parse_ranges("v_y = low\n"), ConfigError);
  const auto fixed = parse_ranges("v_y = 0.5\n");
  EXPECT_EQ(fixed.v_y.lo, 0.5);
  EXPECT_EQ(fixed.v_y.hi, 0.5);
  EXPECT_THROW(parse_ranges("v_y = 0.9 0.2\n"), ConfigError);
  EXPECT_THROW(parse_ranges("angle_jitter = maybe\n"), ConfigError);
}

TEST(SynthesizeDataset, SkipsCorruptFilesAndLogs) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 3);
  atomic_write(src / "broken.png", "garbage");
  const DatasetResult res = synthesize_dataset(src, out, small_ranges());
  EXPECT_EQ(res.records.size(), 3u);
  ASSERT_EQ(res.skipped.size(), 1u);
  EXPECT_EQ(res.skipped[0].file, "broken.png");
  EXPECT_NE(read_file(out / "skipped.log").find("broken.png"), std::string::npos);
  const Manifest m = read_manifest(out / "manifest.jsonl");
  EXPECT_EQ(m.records, res.records);
  EXPECT_EQ(parse_ranges(read_file(out / "config.txt")), small_ranges());
  for (const auto& rec : m.records) {
    EXPECT_TRUE(fs::exists(out / rec.hq_path));
    EXPECT_TRUE(fs::exists(out / rec.lq_path));
    EXPECT_TRUE(fs::exists(out / rec.mask_path));
    EXPECT_EQ(rec.source_dataset, "corpus");
  }
  EXPECT_EQ(m.records[0].id, "img0-00");
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(SynthesizeDataset, PatchModeCrops) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 2, 600, 530);
  write_png(src / "tiny.png", quantize(fbtest::clean_content(100, 100, 9)));
  for (PatchMode mode : {PatchMode::center, PatchMode::random}) {
    ParamRanges r = small_ranges();
    r.patch_mode = mode;
    const DatasetResult res = synthesize_dataset(src, out, r, {.patch = true, .workers = 2});
    ASSERT_EQ(res.records.size(), 2u);
    EXPECT_EQ(res.skipped.size(), 1u);
    for (const auto& rec : res.records) {
      const Image8 lq = read_png(out / rec.lq_path);
      EXPECT_EQ(lq.width, 512);
      EXPECT_EQ(lq.height, 512);
      EXPECT_TRUE(verify_pair(rec, out).pass);
    }
  }
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(SynthesizeDataset, DeterministicAcrossRunsAndWorkers) {
  const fs::path src = fbtest::temp_dir("src"), a = fbtest::temp_dir("a"), b = fbtest::temp_dir("b");
  write_corpus(src, 5);
  ParamRanges r = small_ranges();
  r.records_per_source = 2;
  synthesize_dataset(src, a, r, {.patch = false, .workers = 1});
  synthesize_dataset(src, b, r, {.patch = false, .workers = 4});
  EXPECT_EQ(tree(a), tree(b));
  EXPECT_EQ(tree(a).size(), 5u * 2 * 3 + 3);
  fs::remove_all(src);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(SynthesizeDataset, EmptyCorpusIsError) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  EXPECT_THROW(synthesize_dataset(src, out, small_ranges()), EmptyCorpus);
  atomic_write(src / "junk.png", "x");
  EXPECT_THROW(synthesize_dataset(src, out, small_ranges()), EmptyCorpus);
  EXPECT_THROW(synthesize_dataset(src / "nope", out, small_ranges()), IoError);
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(VerifyPair, FreshRecordPasses) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 3);
  const DatasetResult res = synthesize_dataset(src, out, small_ranges());
  for (const auto& rec : res.records) {
    const VerifyReport v = verify_pair(rec, out);
    EXPECT_TRUE(v.pass) << v.check << ": " << v.detail;
  }
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(VerifyPair, LqReplacedByHqFailsAtBandedPixel) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 1);
  const PairRecord rec = synthesize_dataset(src, out, small_ranges()).records[0];
  fs::copy_file(out / rec.hq_path, out / rec.lq_path, fs::copy_options::overwrite_existing);
  const VerifyReport v = verify_pair(rec, out);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.check, "lq");
  EXPECT_NE(v.detail.find("first difference"), std::string::npos);
  // The reported pixel lies inside the band.
  const FlickerMask mask = read_mask(out / rec.mask_path);
  int x = -1, y = -1;
  ASSERT_EQ(std::sscanf(v.detail.c_str(), "first difference at x=%d y=%d", &x, &y), 2);
  EXPECT_GT(mask(x, y), 0.0);
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(VerifyPair, MaskFromDifferentSeedFailsOnDigest) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 1);
  PairRecord rec = synthesize_dataset(src, out, small_ranges()).records[0];
  BandingParams other = rec.params;
  other.seed ^= 0x1234;
  const RgbImage hq = read_rgb(out / rec.hq_path);
  const DegradationOutput d = synthesize_lq(hq, other);
  write_png(out / rec.mask_path, quantize(d.mask));
  rec.trace_digest = trace_digest(d.trace);
  const VerifyReport v = verify_pair(rec, out);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.check, "trace_digest");
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST(VerifyPair, MissingFilesAndDimensionMismatch) {
  const fs::path src = fbtest::temp_dir("src"), out = fbtest::temp_dir("out");
  write_corpus(src, 1);
  PairRecord rec = synthesize_dataset(src, out, small_ranges()).records[0];
  PairRecord wrong = rec;
  wrong.width += 1;
  EXPECT_EQ(verify_pair(wrong, out).check, "dimensions");
  fs::remove(out / rec.mask_path);
  EXPECT_EQ(verify_pair(rec, out).check, "files");
  fs::remove_all(src);
  fs::remove_all(out);
}
