#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "demix/dataset.hpp"
#include "demix/error.hpp"
#include "demix/metrics.hpp"
#include "demix/synth.hpp"
#include "demix/wav_io.hpp"
#include "support.hpp"

namespace demix {
namespace {

namespace fs = std::filesystem;
using testing::random_waveform;
using testing::ScratchDir;

const std::vector<std::string> kFour = {"bass", "drums", "other", "vocals"};

std::vector<SourcePool> four_pools(std::uint64_t seed, double seconds = 1.5, unsigned rate = 8000) {
  std::vector<SourcePool> pools;
  for (const auto& s : kFour) pools.push_back(procedural_pool(s, 4, seconds, rate, 2, seed));
  return pools;
}

SynthOptions small_options(std::size_t tracks, double seconds = 1.0, unsigned rate = 8000) {
  SynthOptions o;
  o.n_tracks = tracks;
  o.duration_s = seconds;
  o.sample_rate = rate;
  o.seed = 42;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents, for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

void copy_stems(const DatasetRecord& rec, const fs::path& pred_root, const std::vector<std::string>& stems) {
  fs::create_directories(pred_root / rec.id);
  for (const auto& s : stems) fs::copy_file(rec.stem_paths.at(s), pred_root / rec.id / (s + ".wav"));
}

TEST(Synth, HundredTrackDatasetScansCompletely) {
  ScratchDir dir;
  const auto made = make_synthetic_dataset(four_pools(1, 0.6, 4000), small_options(100, 0.5, 4000), dir.path());
  ASSERT_EQ(made.size(), 100u);
  const ScanResult scan = scan_dataset(dir.path());
  EXPECT_EQ(scan.records.size(), 100u);
  EXPECT_TRUE(scan.skipped.empty());
  EXPECT_EQ(scan.stems, kFour);
  EXPECT_EQ(scan.records.front().id, "track000");
  EXPECT_EQ(scan.records.back().id, "track099");
  for (const auto& r : scan.records) {
    EXPECT_EQ(r.length, 2000u);
    EXPECT_EQ(r.channels, 2u);
    EXPECT_DOUBLE_EQ(r.duration_s, 0.5);
  }
  EXPECT_TRUE(fs::is_regular_file(dir / "sources.json"));
}

TEST(Synth, MixtureEqualsStemSumAndRespectsPeak) {
  ScratchDir dir;
  const auto made = make_synthetic_dataset(four_pools(2), small_options(5), dir.path());
  for (const auto& rec : made) {
    const GroundTruth gt = load_record(rec);
    EXPECT_LT(max_abs_diff(gt.stems.sum(), gt.mixture), 1e-6) << rec.id;
    EXPECT_NEAR(gt.mixture.peak(), 0.9, 1e-6);
  }
}

TEST(Synth, ByteIdenticalForAFixedSeed) {
  ScratchDir a;
  ScratchDir b;
  ScratchDir c;
  make_synthetic_dataset(four_pools(3), small_options(4), a.path());
  make_synthetic_dataset(four_pools(3), small_options(4), b.path());
  SynthOptions other = small_options(4);
  other.seed = 43;
  make_synthetic_dataset(four_pools(3), other, c.path());
  EXPECT_EQ(tree(a.path()), tree(b.path()));
  EXPECT_NE(tree(a.path())["track000/mixture.wav"], tree(c.path())["track000/mixture.wav"]);
}

TEST(Synth, PcmEncodingStillSumsWithinOneQuantum) {
  ScratchDir dir;
  SynthOptions o = small_options(2);
  o.encoding = WavEncoding::kPcm16;
  const auto made = make_synthetic_dataset(four_pools(4), o, dir.path());
  const GroundTruth gt = load_record(made.front());
  EXPECT_LE(max_abs_diff(gt.stems.sum(), gt.mixture), 1.0 / 32768.0 + 1e-12);
}

TEST(Synth, SilentSourceStaysSilent) {
  ScratchDir dir;
  auto pools = four_pools(5);
  SourcePool& vocals = pools.back();
  for (auto& s : vocals.sources) s = Waveform(s.num_channels(), s.length(), s.sample_rate());
  const auto made = make_synthetic_dataset(pools, small_options(2), dir.path());
  const GroundTruth gt = load_record(made.front());
  EXPECT_EQ(gt.stems.at("vocals").peak(), 0.0);
  EXPECT_GT(gt.stems.at("bass").peak(), 0.0);
  gt.mixture.check_finite();
}

TEST(Synth, MonoSourcesAreUpmixed) {
  ScratchDir dir;
  std::vector<SourcePool> pools;
  for (const auto& s : {"vocals", "other"}) pools.push_back(procedural_pool(s, 2, 1.0, 8000, 1, 6));
  const auto made = make_synthetic_dataset(pools, small_options(1), dir.path());
  const GroundTruth gt = load_record(made.front());
  EXPECT_EQ(gt.mixture.num_channels(), 2u);
  EXPECT_EQ(gt.stems.at("vocals").slice(0, 10).channel(0)[3], gt.stems.at("vocals").slice(0, 10).channel(1)[3]);
}

TEST(Synth, RefusesToOverwriteTracks) {
  ScratchDir dir;
  make_synthetic_dataset(four_pools(7), small_options(1), dir.path());
  EXPECT_THROW(make_synthetic_dataset(four_pools(7), small_options(1), dir.path()), DatasetError);
}

TEST(Synth, TwoStemVariantReadsPoolsFromDisk) {
  ScratchDir pools;
  ScratchDir out;
  fs::create_directories(pools / "voc");
  fs::create_directories(pools / "ins");
  for (int i = 0; i < 2; ++i) {
    save_wav(random_waveform(2, 5000, i, 0.5, 8000), pools / "voc" / ("v" + std::to_string(i) + ".wav"));
    save_wav(random_waveform(1, 3000, 10 + i, 0.5, 8000), pools / "ins" / ("i" + std::to_string(i) + ".wav"));
  }
  const auto made = make_synthetic_dataset(pools / "voc", pools / "ins", small_options(3), out.path());
  ASSERT_EQ(made.size(), 3u);
  EXPECT_EQ(scan_dataset(out.path()).stems, (std::vector<std::string>{"instrumental", "vocals"}));
}

TEST(SourcePools, ProceduralPoolsAreSeededAndStemSpecific) {
  const SourcePool a = procedural_pool("drums", 3, 0.5, 8000, 2, 1);
  const SourcePool b = procedural_pool("drums", 3, 0.5, 8000, 2, 1);
  const SourcePool c = procedural_pool("bass", 3, 0.5, 8000, 2, 1);
  EXPECT_EQ(a.sources, b.sources);
  EXPECT_NE(a.sources.front(), c.sources.front());
  EXPECT_EQ(a.sources.size(), 3u);
  EXPECT_EQ(a.sources.front().length(), 4000u);
  EXPECT_GT(procedural_pool("theremin", 1, 0.5, 8000, 1, 1).sources.front().peak(), 0.0);
}

TEST(SourcePools, EmptyDirectoryIsADatasetError) {
  ScratchDir dir;
  EXPECT_THROW(load_source_pool("vocals", dir.path()), DatasetError);
}

TEST(FitLength, TrimsAndLoops) {
  const Waveform src = random_waveform(1, 100, 1);
  EXPECT_EQ(fit_length(src, 40, 10, 0), src.slice(10, 40));
  const Waveform looped = fit_length(src, 250, 0, 0);
  ASSERT_EQ(looped.length(), 250u);
  for (std::size_t n = 0; n < 250; ++n) EXPECT_EQ(looped.at(0, n), src.at(0, n % 100)) << n;
  const Waveform faded = fit_length(src, 250, 0, 10);
  EXPECT_EQ(faded.length(), 250u);
  faded.check_finite();
}

TEST(Scan, MissingStemIsSkippedOrStrictError) {
  ScratchDir dir;
  make_synthetic_dataset(four_pools(8), small_options(3), dir.path());
  fs::remove(dir / "track001" / "bass.wav");
  const ScanResult lenient = scan_dataset(dir.path());
  EXPECT_EQ(lenient.records.size(), 2u);
  ASSERT_EQ(lenient.skipped.size(), 1u);
  EXPECT_EQ(lenient.skipped[0].id, "track001");
  EXPECT_NE(lenient.skipped[0].reason.find("bass"), std::string::npos);

  ScanOptions strict;
  strict.strict = true;
  try {
    scan_dataset(dir.path(), strict);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("bass"), std::string::npos);
  }
}

TEST(Scan, ShapeMismatchAndBadRoot) {
  ScratchDir dir;
  make_synthetic_dataset(four_pools(9), small_options(2), dir.path());
  save_wav(random_waveform(2, 10, 1, 0.5, 8000), dir / "track000" / "drums.wav");
  const ScanResult r = scan_dataset(dir.path());
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_NE(r.skipped[0].reason.find("drums.wav"), std::string::npos);
  EXPECT_THROW(scan_dataset(dir / "nope"), DatasetError);
}

TEST(Scan, ExplicitStemsAndMixtureOnly) {
  ScratchDir dir;
  make_synthetic_dataset(four_pools(10), small_options(2), dir.path());
  ScanOptions two;
  two.stems = {"vocals", "bass"};
  EXPECT_EQ(scan_dataset(dir.path(), two).records.front().stem_paths.size(), 2u);
  ScanOptions piano;
  piano.stems = {"piano"};
  EXPECT_TRUE(scan_dataset(dir.path(), piano).records.empty());
  fs::remove(dir / "track000" / "vocals.wav");
  ScanOptions mix_only;
  mix_only.mixture_only = true;
  const ScanResult m = scan_dataset(dir.path(), mix_only);
  EXPECT_EQ(m.records.size(), 2u);
  EXPECT_TRUE(m.records.front().stem_paths.empty());
}

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    make_synthetic_dataset(four_pools(11), small_options(3), data_.path());
    records_ = scan_dataset(data_.path()).records;
  }
  ScratchDir data_;
  ScratchDir pred_;
  std::vector<DatasetRecord> records_;
};

TEST_F(EvaluateTest, GroundTruthCopiesHitTheEpsilonCap) {
  for (const auto& r : records_) copy_stems(r, pred_.path(), kFour);
  const SdrReport rep = evaluate_submission(records_, pred_.path(), {{}, MissingPolicy::kError, {3}});
  double total = 0.0;
  for (const auto& r : records_) {
    const GroundTruth gt = load_record(r);
    double mean = 0.0;
    for (const auto& s : kFour) {
      const double cap = 10 * std::log10((gt.stems.at(s).energy() + 1e-9) / 1e-9);
      EXPECT_NEAR(rep.per_record.at(r.id).stems.at(s), cap, 1e-9);
      mean += cap / 4.0;
    }
    total += mean / 3.0;
    EXPECT_GT(*rep.per_record.at(r.id).instrumental, 80.0);
  }
  EXPECT_NEAR(rep.total, total, 1e-9);
  EXPECT_TRUE(rep.notes.empty());
}

TEST_F(EvaluateTest, MixtureCopiesMatchBruteForceScores) {
  for (const auto& r : records_) {
    fs::create_directories(pred_ / r.id);
    for (const auto& s : kFour) fs::copy_file(r.mixture_path, pred_ / r.id / (s + ".wav"));
  }
  const SdrReport rep = evaluate_submission(records_, pred_.path());
  for (const auto& r : records_) {
    const GroundTruth gt = load_record(r);
    for (const auto& s : kFour) {
      const Waveform& ref = gt.stems.at(s);
      double num = 0.0;
      double den = 0.0;
      for (std::size_t c = 0; c < ref.num_channels(); ++c) {
        for (std::size_t n = 0; n < ref.length(); ++n) {
          num += ref.at(c, n) * ref.at(c, n);
          const double d = ref.at(c, n) - gt.mixture.at(c, n);
          den += d * d;
        }
      }
      EXPECT_NEAR(rep.per_record.at(r.id).stems.at(s), 10 * std::log10((num + 1e-9) / (den + 1e-9)), 1e-9);
    }
  }
}

TEST_F(EvaluateTest, MissingStemsErrorOrScoreZero) {
  for (const auto& r : records_) copy_stems(r, pred_.path(), {"bass", "drums", "vocals"});
  EXPECT_THROW(evaluate_submission(records_, pred_.path()), DatasetError);
  EvaluateOptions zeros;
  zeros.missing = MissingPolicy::kZeros;
  const SdrReport rep = evaluate_submission(records_, pred_.path(), zeros);
  EXPECT_EQ(rep.per_stem.at("other"), 0.0);
  EXPECT_EQ(rep.notes.size(), 3u);
  EXPECT_NE(rep.notes.front().find("other"), std::string::npos);
}

TEST_F(EvaluateTest, MissingTrackFolder) {
  copy_stems(records_[0], pred_.path(), kFour);
  EXPECT_THROW(evaluate_submission(records_, pred_.path()), DatasetError);
  EvaluateOptions zeros;
  zeros.missing = MissingPolicy::kZeros;
  const SdrReport rep = evaluate_submission(records_, pred_.path(), zeros);
  EXPECT_EQ(rep.per_record.at(records_[2].id).mean, 0.0);
  EXPECT_THROW(evaluate_submission(records_, pred_ / "absent"), DatasetError);
}

TEST_F(EvaluateTest, LengthMismatchNeedsPadding) {
  for (const auto& r : records_) copy_stems(r, pred_.path(), kFour);
  const auto& r0 = records_[0];
  const Waveform v = load_wav(r0.stem_paths.at("vocals"));
  save_wav(v.slice(0, v.length() - 5), pred_ / r0.id / "vocals.wav");
  EXPECT_THROW(evaluate_submission(records_, pred_.path()), DatasetError);
  EvaluateOptions pad;
  pad.sdr.pad_mismatched_lengths = true;
  const SdrReport rep = evaluate_submission(records_, pred_.path(), pad);
  EXPECT_EQ(rep.notes.size(), 1u);
  EXPECT_NEAR(rep.per_record.at(r0.id).stems.at("vocals"), sdr(v, v.slice(0, v.length() - 5).slice(0, v.length())),
              1e-9);
}

TEST_F(EvaluateTest, InstrumentalFilePreferredOverDerivedEstimate) {
  for (const auto& r : records_) copy_stems(r, pred_.path(), kFour);
  const auto& r0 = records_[0];
  const GroundTruth gt = load_record(r0);
  const SdrReport derived = evaluate_submission(records_, pred_.path());
  save_wav(gt.mixture, pred_ / r0.id / kInstrumentalFile);
  const SdrReport with_file = evaluate_submission(records_, pred_.path());
  const Waveform ref = instrumental_reference(gt.mixture, gt.stems.at("vocals"));
  EXPECT_NEAR(*with_file.per_record.at(r0.id).instrumental, sdr(ref, gt.mixture), 1e-9);
  EXPECT_GT(*derived.per_record.at(r0.id).instrumental, *with_file.per_record.at(r0.id).instrumental);
}

TEST_F(EvaluateTest, NeverWritesToEitherDirectory) {
  for (const auto& r : records_) copy_stems(r, pred_.path(), kFour);
  const auto data_before = tree(data_.path());
  const auto pred_before = tree(pred_.path());
  evaluate_submission(records_, pred_.path());
  EXPECT_EQ(tree(data_.path()), data_before);
  EXPECT_EQ(tree(pred_.path()), pred_before);
}

}  // namespace
}  // namespace demix
