// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "demix/config.hpp"
#include "demix/dataset.hpp"
#include "demix/ensemble.hpp"
#include "demix/leaderboard.hpp"
#include "demix/metrics.hpp"
#include "demix/separator.hpp"
#include "demix/synth.hpp"
#include "demix/wav_io.hpp"
#include "demix/weight_search.hpp"
#include "support.hpp"

namespace {

using namespace demix;
using demix::testing::random_waveform;

struct Outcome {
  bool pass = false;
  std::string detail;
  /// Runtime budget in seconds; 0 means none.
  double budget = 0.0;
};

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome sdr_correctness() {
  const Waveform s = random_waveform(2, 441000, 1);
  const double zero = sdr(s, Waveform(2, s.length(), s.sample_rate()));

  Waveform g = random_waveform(2, s.length(), 2);
  g *= std::sqrt(0.1 * s.energy() / g.energy());
  const double ten = sdr(s, s + g);

  const Waveform e = s + 0.2 * random_waveform(2, s.length(), 3);
  const double base = sdr(s, e, 0.0);
  const double scaled = sdr(0.37 * s, 0.37 * e, 0.0);

  const bool ok = zero == 0.0 && std::abs(ten - 10.0) <= 0.01 && std::abs(scaled - base) <= 1e-9;
  return {ok, fmt("zero=%.2f dB, tenth-power noise=%.6f dB, |scale 0.37 delta|=%.1e dB", zero, ten, std::abs(scaled - base)),
          1.0};
}

// ------------------------------------------------------------------ 2

Outcome chunked_identity() {
  const Waveform x = random_waveform(2, 60 * 44100, 4);
  const Separator sep = make_separator(demix::testing::simple_spec(BackendKind::kPassthrough, {"mix"}));
  double worst = 0.0;
  for (double overlap : {0.0, 0.25, 0.6, 0.75}) {
    for (std::size_t shifts : {1u, 2u, 5u}) {
      const ChunkParams p = ChunkSettings{10.0, overlap, shifts, 0.5}.to_params(44100);
      worst = std::max(worst, max_abs_diff(chunked_separate(sep, x, p, {jobs()}).at("mix"), x));
    }
  }
  return {worst < 1e-5, fmt("60 s stereo, 4 overlaps x 3 shift counts, max abs error %.2e", worst), 10.0};
}

// ------------------------------------------------------------------ 3

Outcome polarity_noop() {
  const Waveform x = random_waveform(2, 20 * 44100, 5);
  const Separator sep = make_separator(demix::testing::simple_spec(BackendKind::kLinearBand, {"bass", "drums", "other", "vocals"}));
  double worst = 0.0;
  for (double overlap : {0.0, 0.6}) {
    for (std::size_t shifts : {1u, 2u}) {
      const ChunkParams p = ChunkSettings{10.0, overlap, shifts, 0.5}.to_params(44100);
      const StemSet plain = chunked_separate(sep, x, p, {jobs()});
      const StemSet tta = tta_polarity_all(sep, x, p, {jobs()});
      for (const auto& [stem, w] : plain) worst = std::max(worst, max_abs_diff(w, tta.at(stem)));
    }
  }
  return {worst <= 1e-9, fmt("linear_band, 4 chunk settings, max |tta - plain| %.2e", worst)};
}

// ------------------------------------------------------------------ 4

Outcome reconstruction() {
  double bass_err = 0.0, drums_err = 0.0, other_err = 0.0, sum_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Waveform b = random_waveform(2, 44100, 100 + seed);
    const Waveform d = random_waveform(2, 44100, 200 + seed);
    const Waveform o = random_waveform(2, 44100, 300 + seed);
    const Waveform instr = b + d + o;
    const InstrumentStems out = reconstruct_final(instr, {b, d, o});
    const Waveform third = (1.0 / 3.0) * (b + d);
    bass_err = std::max(bass_err, max_abs_diff(out.bass, b));
    drums_err = std::max(drums_err, max_abs_diff(out.drums, d));
    other_err = std::max(other_err, max_abs_diff(out.other, o + third));
    sum_err = std::max(sum_err, max_abs_diff(out.bass + out.drums + out.other - instr, third));
  }
  const bool ok = bass_err < 1e-6 && drums_err < 1e-6 && other_err < 1e-6 && sum_err < 1e-6;
  return {ok, fmt("20 random bar sets: bass %.1e, drums %.1e, other %.1e, stem-sum deviation %.1e", bass_err,
                  drums_err, other_err, sum_err)};
}

// ------------------------------------------------------------------ 5

Outcome ensemble_gain() {
  const std::vector<std::string> stems = {"vocals", "accompaniment"};
  std::vector<double> scores(20), singles(20);
  parallel_for(20, jobs(), [&](std::size_t r) {
    const auto gt = demix::testing::random_truth(stems, 2, 10 * 44100, 1000 + r);
    std::vector<Waveform> ests;
    for (std::uint64_t k = 0; k < 3; ++k) {
      const Separator sep = make_separator(demix::testing::oracle_spec("o" + std::to_string(k), {"vocals"}, 10.0, 31 * r + k), gt);
      ests.push_back(chunked_separate(sep, gt->mixture, ChunkSettings{10.0, 0.25, 1, 0}.to_params(44100)).at("vocals"));
    }
    singles[r] = sdr(gt->stems.at("vocals"), ests[0]);
    scores[r] = sdr(gt->stems.at("vocals"), blend_weighted(ests, WeightVector({1, 1, 1})));
  });
  const double mean = pairwise_sum(scores) / 20.0;
  const double single = pairwise_sum(singles) / 20.0;
  return {mean >= 13.5, fmt("20 x 10 s records, single %.2f dB, equal-weight blend of 3 %.2f dB (theory %.2f)", single,
                            mean, 10.0 + 10.0 * std::log10(3.0)),
          30.0};
}

// ------------------------------------------------------------------ 6

Outcome weight_recovery() {
  using clock = std::chrono::steady_clock;
  demix::testing::ScratchDir cache_dir("demix-acceptance");
  WeightSearchProblem exact;
  exact.stem = "vocals";
  exact.backend_names = {"noisy_a", "exact", "noisy_b", "noisy_c"};
  WeightSearchProblem mirrored;
  mirrored.stem = "vocals";
  mirrored.backend_names = {"plus", "minus"};
  for (std::size_t r = 0; r < 5; ++r) {
    const auto gt = demix::testing::random_truth({"vocals", "rest"}, 2, 5 * 44100, 77 + r);
    const Waveform& truth = gt->stems.at("vocals");
    CandidateRecord rec{"rec" + std::to_string(r), truth, {}};
    for (const auto& [name, snr] : std::vector<std::pair<std::string, double>>{
             {"noisy_a", 8.0}, {"exact", INFINITY}, {"noisy_b", 12.0}, {"noisy_c", 15.0}}) {
      rec.estimates.push_back(separate(demix::testing::oracle_spec(name, {"vocals"}, snr, 5 * r + name.size()), gt->mixture, gt).at("vocals"));
    }
    exact.records.push_back(rec);
    const Waveform noisy = separate(demix::testing::oracle_spec("m", {"vocals"}, 6.0, 900 + r), gt->mixture, gt).at("vocals");
    mirrored.records.push_back({rec.id, truth, {noisy, 2.0 * truth - noisy}});
  }
  save_problem_cache(exact, cache_dir / "exact");
  save_problem_cache(mirrored, cache_dir / "mirrored");

  const auto t0 = clock::now();
  const WeightSearchProblem exact_cached = load_problem_cache(cache_dir / "exact");
  const WeightSearchProblem mirrored_cached = load_problem_cache(cache_dir / "mirrored");
  const GridResult g1 = grid_search(exact_cached, integer_grid(4, 0, 4), {jobs()});
  const GridResult g2 = grid_search(mirrored_cached, integer_grid(2, 0, 4), {jobs()});
  const double search_s = std::chrono::duration<double>(clock::now() - t0).count();

  const auto w1 = g1.best.weights.values();
  const auto w2 = g2.best.weights.values();
  const bool zeros = w1[0] == 0 && w1[2] == 0 && w1[3] == 0 && w1[1] > 0;
  const bool equal = w2[0] == w2[1];
  return {zeros && equal && search_s < 60.0,
          fmt("exact among noisy -> %s (%zu points); mirrored pair -> %s; cached search %.2f s",
              to_string(g1.best.weights).c_str(), g1.table.size(), to_string(g2.best.weights).c_str(), search_s)};
}

// ------------------------------------------------------------------ 7

/// Mean over records of each record's stem-mean, for one separator run
/// standalone on the mixture.
double standalone_mean(const StageMember& m, bool configured_polarity, const std::vector<DatasetRecord>& records) {
  StageMember plain = m;
  if (!configured_polarity) plain.polarity = Polarity::kNormal;
  std::vector<double> means(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto gt = std::make_shared<const GroundTruth>(load_record(records[i]));
    const StemSet out = run_member(plain, gt->mixture, {gt, {jobs()}});
    StemSet refs, ests;
    for (const auto& s : m.spec.produced_stems) {
      refs.set(s, gt->stems.at(s));
      ests.set(s, quantize(out.at(s), WavEncoding::kFloat32));
    }
    means[i] = sdr_record(refs, ests).mean;
  }
  return pairwise_sum(means) / static_cast<double>(means.size());
}

Outcome end_to_end(std::vector<std::string>& info) {
  demix::testing::ScratchDir work("demix-acceptance");
  std::vector<SourcePool> pools;
  for (const auto& s : {"bass", "drums", "other", "vocals"}) pools.push_back(procedural_pool(s, 6, 12.0, 44100, 2, 2023));
  SynthOptions opts;
  opts.n_tracks = 10;
  opts.duration_s = 10.0;
  opts.seed = 7;
  make_synthetic_dataset(pools, opts, work / "data");
  const auto records = scan_dataset(work / "data").records;

  const PipelineConfig cfg = resolve_config("test-oracle");
  auto run_all = [&](const PipelineConfig& c, const std::filesystem::path& out) {
    for (const auto& rec : records) {
      auto gt = std::make_shared<const GroundTruth>(load_record(rec));
      const StemSet stems = run_pipeline(c, gt->mixture, {gt, {jobs()}});
      std::filesystem::create_directories(out / rec.id);
      for (const auto& [name, w] : stems) save_wav(w, out / rec.id / (name + ".wav"));
    }
    return evaluate_submission(records, out, {{}, MissingPolicy::kError, {jobs()}});
  };
  const SdrReport pipeline = run_all(cfg, work / "pred");

  double best = -INFINITY, best_tta = -INFINITY;
  std::string best_name, best_tta_name;
  for (const auto* members : {&cfg.vocal_members, &cfg.instrument_members}) {
    for (const auto& m : *members) {
      const double plain = standalone_mean(m, false, records);
      if (plain > best) best = plain, best_name = m.spec.name;
      const double tta = standalone_mean(m, true, records);
      if (tta > best_tta) best_tta = tta, best_tta_name = m.spec.name;
    }
  }

  PipelineConfig conserving = cfg;
  conserving.strict_conservation = true;
  const SdrReport strict = run_all(conserving, work / "pred-strict");

  std::string per_stem;
  for (const auto& [s, v] : pipeline.per_stem) per_stem += fmt(" %s %.2f", s.c_str(), v);
  info.push_back("AC7 info: pipeline per-stem SDR:" + per_stem);
  info.push_back(fmt("AC7 info: best standalone backend with its configured polarity TTA: %s %.2f dB",
                     best_tta_name.c_str(), best_tta));
  info.push_back(fmt("AC7 info: pipeline with strict stem-sum conservation: %.2f dB (other %.2f)", strict.total,
                     strict.per_stem.at("other")));
  return {pipeline.total > best,
          fmt("10 x 10 s tracks: pipeline mean %.2f dB vs best standalone backend %s %.2f dB", pipeline.total,
              best_name.c_str(), best),
          120.0};
}

// ------------------------------------------------------------------ 8

/// Independent ranking: position = number of entries that must precede it.
std::vector<std::size_t> oracle_order(const std::vector<LeaderboardEntry>& rows, const std::string& key) {
  auto value = [&](const LeaderboardEntry& e) -> std::optional<double> {
    if (key == "instrum") return e.instrumental;
    if (key == "total") return e.total;
    auto it = e.per_stem.find(key);
    return it == e.per_stem.end() ? std::nullopt : std::optional<double>(it->second);
  };
  auto precedes = [&](std::size_t a, std::size_t b) {
    const auto va = value(rows[a]);
    const auto vb = value(rows[b]);
    if (va.has_value() != vb.has_value()) return va.has_value();
    if (va && *va != *vb) return *va > *vb;
    if (rows[a].submitted_at != rows[b].submitted_at) return rows[a].submitted_at < rows[b].submitted_at;
    return a < b;
  };
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t rank = 0;
    for (std::size_t j = 0; j < rows.size(); ++j) rank += j != i && precedes(j, i);
    order[rank] = i;
  }
  return order;
}

Outcome leaderboard_fidelity() {
  std::size_t checked = 0;
  bool ok = true;
  std::string bad;
  for (const char* table : {"synth_single_models", "synth_ensembles", "multisong_vocals_instrumental",
                            "multisong_bass_drums_other", "cdx_ablation", "final_ensemble"}) {
    const auto rows = demix::testing::fixture_table(table);
    std::set<std::string> keys = {"bass", "drums", "other", "vocals", "instrum", "total"};
    for (const auto& r : rows) {
      for (const auto& [k, v] : r.per_stem) keys.insert(k);
    }
    for (const auto& key : keys) {
      const auto got = demix::testing::rank_positions(rows, sort_entries(rows, key));
      if (got != oracle_order(rows, key)) ok = false, bad += std::string(" ") + table + "/" + key;
      ++checked;
    }
  }
  const auto t3 = sort_entries(demix::testing::fixture_table("multisong_vocals_instrumental"), "instrum");
  const bool top3 = *t3[0].instrumental == 15.82 && *t3[1].instrumental == 15.70 && *t3[2].instrumental == 15.61;
  const auto t4 = sort_entries(demix::testing::fixture_table("multisong_bass_drums_other"), "bass");
  const bool bass = t4[0].per_stem.at("bass") == 12.50 && t4[1].per_stem.at("bass") == 12.24;
  const auto t1 = sort_entries(demix::testing::fixture_table("synth_single_models"), "instrum");
  const bool synth = *t1[0].instrumental == 11.11 && *t1[1].instrumental == 10.83 && *t1[2].instrumental == 10.61;
  ok = ok && top3 && bass && synth;
  return {ok, fmt("%zu table/key orders match the reference ranking; instrum 15.82 > 15.70 > 15.61; bass 12.50 > 12.24%s",
                  checked, bad.empty() ? "" : (" mismatches:" + bad).c_str())};
}

// ------------------------------------------------------------------ 9

Outcome non_reproducibility(std::vector<std::string>& info) {
  std::ifstream in(std::filesystem::path(DEMIX_DATA_DIR) / "reference_results.json");
  const auto doc = nlohmann::json::parse(in);
  const bool flagged = doc.at("reproducible") == false;
  double private_mean = NAN, instr = NAN;
  for (const auto& row : doc.at("tables").at("final_ensemble").at("rows")) {
    if (row.at("name") == "MDX23 private test") private_mean = row.at("scores").at("total");
  }
  instr = doc.at("tables").at("multisong_vocals_instrumental").at("rows").at(0).at("scores").at("instrum");
  info.push_back(
      "AC9 statement: the published scores (final ensemble mean 9.25 dB on the private test set, instrumental "
      "15.82 dB on the multisong set) come from pretrained neural models on hidden test audio. They are not "
      "reproducible here and ship only as leaderboard fixtures; acceptance rests on criteria 1-8.");
  return {flagged && private_mean == 9.25 && instr == 15.82,
          fmt("fixtures flagged reproducible=false; private-test mean %.2f, multisong instrumental %.2f present",
              private_mean, instr)};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  std::vector<std::string> info;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sdr-correctness", sdr_correctness},
      {"chunked-identity", chunked_identity},
      {"polarity-tta-noop", polarity_noop},
      {"reconstruction-identities", reconstruction},
      {"ensemble-gain", ensemble_gain},
      {"weight-recovery", weight_recovery},
      {"end-to-end", [&] { return end_to_end(info); }},
      {"leaderboard-fidelity", leaderboard_fidelity},
      {"non-reproducibility", [&] { return non_reproducibility(info); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    const bool in_time = o.budget == 0.0 || secs < o.budget;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::string timing = fmt("%.2f s", secs);
    if (o.budget > 0.0) timing += fmt(" / budget %.0f s", o.budget);
    std::printf("AC%zu %s %s: %s [%s]\n", i + 1, pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  for (const auto& line : info) std::printf("%s\n", line.c_str());
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
