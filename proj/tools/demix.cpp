// demix: separation, evaluation, dataset generation, leaderboards and
// ensemble weight search from one entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 partial batch
// failure (some tracks failed and are listed on stderr).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "demix/config.hpp"
#include "demix/dataset.hpp"
#include "demix/ensemble.hpp"
#include "demix/error.hpp"
#include "demix/leaderboard.hpp"
#include "demix/metrics.hpp"
#include "demix/synth.hpp"
#include "demix/wav_io.hpp"
#include "demix/weight_search.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

struct Globals {
  unsigned jobs = 1;
  int verbosity = 0;
};

void info(const Globals& g, const std::string& msg) {
  if (g.verbosity > 0) std::cerr << msg << '\n';
}

bool needs_truth(const demix::PipelineConfig& cfg) {
  auto any = [](const std::vector<demix::StageMember>& ms) {
    return std::any_of(ms.begin(), ms.end(),
                       [](const auto& m) { return m.spec.kind == demix::BackendKind::kOracle; });
  };
  return any(cfg.vocal_members) || any(cfg.instrument_members);
}

void write_stems(const demix::StemSet& stems, const fs::path& dir, demix::WavEncoding enc) {
  fs::create_directories(dir);
  for (const auto& [name, w] : stems) {
    const auto res = demix::save_wav(w, dir / (name + ".wav"), enc);
    if (res.clipped > 0) std::cerr << fmt::format("warning: {} samples clipped in {}\n", res.clipped, (dir / (name + ".wav")).string());
  }
}

/// Ground truth for a loose mixture file: sibling WAVs are its stems.
std::shared_ptr<const demix::GroundTruth> sibling_truth(const fs::path& mixture_path, const demix::Waveform& mixture) {
  auto gt = std::make_shared<demix::GroundTruth>();
  gt->mixture = mixture;
  for (const auto& e : fs::directory_iterator(mixture_path.parent_path())) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    if (fs::equivalent(e.path(), mixture_path)) continue;
    gt->stems.set(e.path().stem().string(), demix::load_wav(e.path()));
  }
  return gt;
}

// ---------------------------------------------------------------- separate

struct SeparateArgs {
  std::string config;
  std::string input;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::string encoding = "float32";
};

int cmd_separate(const Globals& g, const SeparateArgs& a) {
  demix::PipelineConfig cfg = demix::resolve_config(a.config);
  if (a.seed) demix::reseed_oracles(cfg, *a.seed);
  const auto enc = demix::parse_wav_encoding(a.encoding);
  const demix::ExecOptions exec{g.jobs};

  if (fs::is_regular_file(a.input)) {
    const demix::Waveform mix = demix::load_wav(a.input);
    demix::RunContext ctx{nullptr, exec};
    if (needs_truth(cfg)) ctx.truth = sibling_truth(a.input, mix);
    write_stems(demix::run_pipeline(cfg, mix, ctx), a.output, enc);
    info(g, "wrote stems to " + a.output);
    return kExitOk;
  }
  if (!fs::is_directory(a.input)) {
    std::cerr << "error: input not found: " << a.input << '\n';
    return kExitUsage;
  }

  demix::ScanOptions scan_opts;
  scan_opts.mixture_only = !needs_truth(cfg);
  const auto scan = demix::scan_dataset(a.input, scan_opts);
  std::vector<std::string> failed;
  for (const auto& s : scan.skipped) failed.push_back(s.id + ": " + s.reason);
  for (const auto& rec : scan.records) {
    try {
      auto gt = std::make_shared<const demix::GroundTruth>(demix::load_record(rec));
      const demix::RunContext ctx{gt, exec};
      write_stems(demix::run_pipeline(cfg, gt->mixture, ctx), fs::path(a.output) / rec.id, enc);
      info(g, "separated " + rec.id);
    } catch (const demix::ConfigError&) {
      throw;
    } catch (const demix::Error& e) {
      failed.push_back(rec.id + ": " + e.what());
      if (const auto* be = dynamic_cast<const demix::BackendError*>(&e); be && !be->diagnostics().empty()) {
        info(g, be->diagnostics());
      }
    }
  }
  std::cout << fmt::format("separated {} of {} tracks\n", scan.records.size() + scan.skipped.size() - failed.size(),
                           scan.records.size() + scan.skipped.size());
  if (failed.empty()) return kExitOk;
  for (const auto& f : failed) std::cerr << "failed: " << f << '\n';
  return kExitPartial;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string dataset;
  std::string predictions;
  std::string report;
  std::vector<std::string> stems;
  std::string missing = "error";
  double epsilon = demix::kDefaultSdrEpsilon;
  bool pad = false;
  bool strict = false;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto scan = demix::scan_dataset(a.dataset, {a.stems, a.strict});
  for (const auto& s : scan.skipped) std::cerr << "skipped track " << s.id << ": " << s.reason << '\n';
  if (scan.records.empty()) {
    std::cerr << "error: no usable tracks in " << a.dataset << '\n';
    return kExitUsage;
  }
  demix::EvaluateOptions opts;
  opts.sdr.epsilon = a.epsilon;
  opts.sdr.pad_mismatched_lengths = a.pad;
  opts.missing = a.missing == "zeros" ? demix::MissingPolicy::kZeros : demix::MissingPolicy::kError;
  opts.exec.jobs = g.jobs;
  const auto report = demix::evaluate_submission(scan.records, a.predictions, opts);
  std::cout << demix::format_report_table(report);
  for (const auto& n : report.notes) std::cerr << "note: " << n << '\n';
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    out << demix::report_to_json(report).dump(2) << '\n';
    if (!out) {
      std::cerr << "error: cannot write report " << a.report << '\n';
      return kExitUsage;
    }
    info(g, "report written to " + a.report);
  }
  return kExitOk;
}

// ------------------------------------------------------------ make-dataset

struct MakeDatasetArgs {
  std::string output;
  std::size_t tracks = 100;
  double duration = 60.0;
  unsigned rate = demix::kDefaultSampleRate;
  std::size_t channels = 2;
  std::uint64_t seed = 0;
  std::string encoding = "float32";
  std::string vocal_pool;
  std::string instr_pool;
  std::vector<std::string> pools;
  std::vector<std::string> procedural{"vocals", "bass", "drums", "other"};
  /// With --pool, procedural stems are added only when asked for.
  bool procedural_given = false;
  std::size_t pool_size = 8;
  double source_seconds = 7.0;
};

int cmd_make_dataset(const Globals& g, const MakeDatasetArgs& a) {
  demix::SynthOptions opts;
  opts.n_tracks = a.tracks;
  opts.duration_s = a.duration;
  opts.sample_rate = a.rate;
  opts.channels = a.channels;
  opts.seed = a.seed;
  opts.encoding = demix::parse_wav_encoding(a.encoding);

  std::vector<demix::SourcePool> pools;
  if (!a.vocal_pool.empty() || !a.instr_pool.empty()) {
    if (a.vocal_pool.empty() || a.instr_pool.empty()) {
      std::cerr << "error: --vocal-pool and --instr-pool go together\n";
      return kExitUsage;
    }
    pools.push_back(demix::load_source_pool("vocals", a.vocal_pool));
    pools.push_back(demix::load_source_pool("instrumental", a.instr_pool));
  } else if (!a.pools.empty()) {
    for (const auto& spec : a.pools) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "error: --pool expects stem=directory, got '" << spec << "'\n";
        return kExitUsage;
      }
      pools.push_back(demix::load_source_pool(spec.substr(0, eq), spec.substr(eq + 1)));
    }
    if (a.procedural_given) {
      for (const auto& stem : a.procedural) {
        if (std::any_of(pools.begin(), pools.end(), [&](const auto& p) { return p.stem == stem; })) {
          std::cerr << "error: stem '" << stem << "' has both a --pool and a --procedural source\n";
          return kExitUsage;
        }
        pools.push_back(demix::procedural_pool(stem, a.pool_size, a.source_seconds, a.rate, a.channels, a.seed));
      }
    }
  } else {
    for (const auto& stem : a.procedural) {
      pools.push_back(demix::procedural_pool(stem, a.pool_size, a.source_seconds, a.rate, a.channels, a.seed));
    }
  }
  const auto records = demix::make_synthetic_dataset(pools, opts, a.output);
  std::cout << fmt::format("wrote {} tracks of {:g} s to {}\n", records.size(), a.duration, a.output);
  info(g, "source picks recorded in " + (fs::path(a.output) / "sources.json").string());
  return kExitOk;
}

// ------------------------------------------------------------- leaderboard

struct LeaderboardArgs {
  std::string store;
  std::string sort = demix::kTotalKey;
  std::string submit;
  std::string name;
  std::string notes;
  std::string submitted_at;
};

int cmd_leaderboard(const Globals&, const LeaderboardArgs& a) {
  const demix::Leaderboard board(a.store);
  if (!a.submit.empty()) {
    if (a.name.empty()) {
      std::cerr << "error: --submit needs --name\n";
      return kExitUsage;
    }
    std::ifstream in(a.submit);
    if (!in) {
      std::cerr << "error: cannot read report " << a.submit << '\n';
      return kExitUsage;
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << a.submit << " is not valid JSON: " << e.what() << '\n';
      return kExitUsage;
    }
    board.append(demix::entry_from_report(a.name, demix::report_from_json(doc), a.notes, a.submitted_at));
  }
  std::cout << demix::format_leaderboard(board.view(a.sort), a.sort);
  return kExitOk;
}

// -------------------------------------------------------- optimize-weights

struct OptimizeArgs {
  std::string config;
  std::string dataset;
  std::vector<std::string> stems;
  std::string grid = "0:20";
  bool ascent = false;
  std::vector<double> steps{4, 2, 1};
  std::size_t max_rounds = 50;
  std::string cache;
  std::size_t top = 10;
  std::optional<std::uint64_t> seed;
  double epsilon = demix::kDefaultSdrEpsilon;
  std::string output;
};

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw demix::ConfigError("--grid expects lo:hi, got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw demix::ConfigError("--grid expects integers lo:hi, got '" + text + "'");
  }
}

int cmd_optimize(const Globals& g, const OptimizeArgs& a) {
  demix::PipelineConfig cfg = demix::resolve_config(a.config);
  if (a.seed) demix::reseed_oracles(cfg, *a.seed);
  const demix::ExecOptions exec{g.jobs};

  std::map<std::string, demix::WeightSearchProblem> problems;
  const fs::path cache(a.cache);
  const bool cached = !a.cache.empty() && fs::is_directory(cache) && !fs::is_empty(cache);
  if (cached) {
    for (const auto& e : fs::directory_iterator(cache)) {
      if (fs::is_regular_file(e.path() / "index.json")) {
        auto p = demix::load_problem_cache(e.path());
        problems.emplace(p.stem, std::move(p));
      }
    }
    info(g, "loaded cached backend outputs from " + a.cache);
  } else {
    if (a.dataset.empty()) {
      std::cerr << "error: --dataset is required when no cache exists\n";
      return kExitUsage;
    }
    const auto scan = demix::scan_dataset(a.dataset);
    for (const auto& s : scan.skipped) std::cerr << "skipped track " << s.id << ": " << s.reason << '\n';
    std::vector<demix::TruthRecord> recs;
    for (const auto& r : scan.records) {
      recs.push_back({r.id, std::make_shared<const demix::GroundTruth>(demix::load_record(r))});
    }
    problems = demix::build_problems(cfg, recs, a.epsilon, exec);
    if (!a.cache.empty()) {
      for (const auto& [stem, p] : problems) demix::save_problem_cache(p, cache / stem);
      info(g, "cached backend outputs in " + a.cache);
    }
  }

  const auto [lo, hi] = parse_range(a.grid);
  nlohmann::json result = nlohmann::json::object();
  for (const auto& [stem, p] : problems) {
    if (!a.stems.empty() && std::find(a.stems.begin(), a.stems.end(), stem) == a.stems.end()) continue;
    std::cout << fmt::format("== {} ({} backends, {} records)\n", stem, p.dimensions(), p.records.size());
    demix::ScoredWeights best;
    if (a.ascent) {
      const auto& current = stem == cfg.vocal_stem ? cfg.vocal_weights : cfg.instrument_weights.at(stem);
      const double start = demix::score_weights(p, current);
      best = demix::coordinate_ascent(p, current, a.steps, a.max_rounds);
      std::cout << fmt::format("config {} -> {:.3f} dB; ascent {} -> {:.3f} dB\n", demix::to_string(current), start,
                               demix::to_string(best.weights), best.score);
    } else {
      const auto grid = demix::grid_search(p, demix::integer_grid(p.dimensions(), lo, hi), exec);
      std::cout << demix::format_ranked_table(p, grid.table, a.top);
      best = grid.best;
    }
    result[stem] = {{"weights", std::vector<double>(best.weights.values().begin(), best.weights.values().end())},
                    {"score", best.score},
                    {"backends", p.backend_names}};
  }
  if (!a.output.empty()) {
    std::ofstream out(a.output);
    out << result.dump(2) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- backends

int cmd_backends(const Globals&, const std::string& config) {
  if (config.empty()) {
    std::cout << "built-in presets:\n";
    for (const auto& name : demix::preset_names()) std::cout << "  " << name << '\n';
    std::cout << "backend kinds: external, oracle, linear_band, passthrough\n";
    return kExitOk;
  }
  const auto cfg = demix::resolve_config(config);
  auto print = [](const char* stage, const std::vector<demix::StageMember>& ms) {
    for (const auto& m : ms) {
      const auto& s = m.spec;
      std::cout << fmt::format("  {:<8} {:<22} {:<12} stems=[{}] overlap={:g} shifts={} polarity={}{}\n", stage,
                               s.name, demix::to_string(s.kind), fmt::join(s.produced_stems, ","), m.chunking.overlap,
                               m.chunking.shifts,
                               m.polarity == demix::Polarity::kNormal
                                   ? "normal"
                                   : (m.polarity == demix::Polarity::kInverted ? "inverted" : "both"),
                               s.output_mode == demix::OutputMode::kComplement ? " complement" : "");
    }
  };
  std::cout << fmt::format("{}: stems [{}]\n", cfg.name, fmt::join(cfg.output_stems(), ", "));
  print("stage1", cfg.vocal_members);
  print("stage2", cfg.instrument_members);
  if (cfg.kind != demix::PipelineKind::kSingle) std::cout << "  vocal weights " << demix::to_string(cfg.vocal_weights) << '\n';
  for (const auto& [stem, w] : cfg.instrument_weights) std::cout << "  " << stem << " weights " << demix::to_string(w) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(true);
  std::setvbuf(stdout, nullptr, _IOLBF, 0);

  CLI::App app{"Ensemble music demixing and SDR benchmarking"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  app.add_option("-j,--jobs", g.jobs, "Worker threads for chunks, backends and records")
      ->check(CLI::Range(1u, 1024u));
  app.add_flag("-v,--verbose", g.verbosity, "Progress messages on stderr (repeatable)");

  SeparateArgs sep;
  auto* s = app.add_subcommand("separate", "Run a pipeline on a WAV file or a dataset directory");
  s->add_option("-c,--config", sep.config, "Config file, name in $DEMIX_CONFIG_DIR, or preset")->required();
  s->add_option("-i,--input", sep.input, "Mixture WAV or dataset root")->required();
  s->add_option("-o,--output", sep.output, "Output directory")->required();
  s->add_option("--seed", sep.seed, "Reseeds every oracle backend");
  s->add_option("--encoding", sep.encoding)->check(CLI::IsMember({"pcm16", "pcm24", "float32"}));

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score predictions against a dataset");
  e->add_option("-d,--dataset", ev.dataset)->required();
  e->add_option("-p,--predictions", ev.predictions)->required();
  e->add_option("-r,--report", ev.report, "Write the machine-readable report here");
  e->add_option("--stems", ev.stems, "Required stems (default: inferred)")->delimiter(',');
  e->add_option("--missing", ev.missing, "Missing prediction policy")->check(CLI::IsMember({"error", "zeros"}));
  e->add_option("--epsilon", ev.epsilon)->check(CLI::NonNegativeNumber);
  e->add_flag("--pad", ev.pad, "Zero-pad or cut predictions of the wrong length");
  e->add_flag("--strict", ev.strict, "Fail on malformed track folders instead of skipping them");

  MakeDatasetArgs md;
  auto* m = app.add_subcommand("make-dataset", "Generate a synthetic benchmark");
  m->add_option("-o,--output", md.output)->required();
  m->add_option("-n,--tracks", md.tracks)->check(CLI::PositiveNumber);
  m->add_option("--duration", md.duration, "Seconds per track")->check(CLI::PositiveNumber);
  m->add_option("--rate", md.rate)->check(CLI::PositiveNumber);
  m->add_option("--channels", md.channels)->check(CLI::Range(1, 2));
  m->add_option("--seed", md.seed);
  m->add_option("--encoding", md.encoding)->check(CLI::IsMember({"pcm16", "pcm24", "float32"}));
  m->add_option("--vocal-pool", md.vocal_pool, "Directory of vocal WAVs");
  m->add_option("--instr-pool", md.instr_pool, "Directory of instrumental WAVs");
  m->add_option("--pool", md.pools, "stem=directory (repeatable)");
  m->add_option("--procedural", md.procedural, "Stems for generated sources")->delimiter(',');
  m->add_option("--pool-size", md.pool_size)->check(CLI::PositiveNumber);
  m->add_option("--source-seconds", md.source_seconds)->check(CLI::PositiveNumber);

  LeaderboardArgs lb;
  auto* l = app.add_subcommand("leaderboard", "Submit to or view a sorted leaderboard");
  l->add_option("-s,--store", lb.store)->required();
  l->add_option("--sort", lb.sort, "bass, drums, other, vocals, instrum, total, or another stem");
  l->add_option("--submit", lb.submit, "Report JSON to append");
  l->add_option("--name", lb.name);
  l->add_option("--notes", lb.notes);
  l->add_option("--submitted-at", lb.submitted_at, "ISO-8601 UTC timestamp (default: now)");

  OptimizeArgs op;
  auto* o = app.add_subcommand("optimize-weights", "Search ensemble weights on a validation set");
  o->add_option("-c,--config", op.config)->required();
  o->add_option("-d,--dataset", op.dataset);
  o->add_option("--stems", op.stems, "Only these stems")->delimiter(',');
  o->add_option("--grid", op.grid, "Integer range lo:hi per dimension");
  o->add_flag("--ascent", op.ascent, "Coordinate ascent from the config's weights instead of a grid");
  o->add_option("--steps", op.steps)->delimiter(',');
  o->add_option("--max-rounds", op.max_rounds);
  o->add_option("--cache", op.cache, "Backend output cache directory (read if present, else written)");
  o->add_option("--top", op.top, "Rows of the ranked table to print");
  o->add_option("--seed", op.seed);
  o->add_option("--epsilon", op.epsilon)->check(CLI::NonNegativeNumber);
  o->add_option("--output", op.output, "Write best weights as JSON");

  std::string backends_config;
  auto* b = app.add_subcommand("backends", "List presets, or the backends of a config");
  b->add_option("-c,--config", backends_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_separate(g, sep);
    if (e->parsed()) return cmd_evaluate(g, ev);
    if (m->parsed()) {
      md.procedural_given = m->count("--procedural") > 0;
      return cmd_make_dataset(g, md);
    }
    if (l->parsed()) return cmd_leaderboard(g, lb);
    if (o->parsed()) return cmd_optimize(g, op);
    if (b->parsed()) return cmd_backends(g, backends_config);
  } catch (const demix::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    if (const auto* be = dynamic_cast<const demix::BackendError*>(&err); be && !be->diagnostics().empty()) {
      std::cerr << be->diagnostics() << '\n';
    }
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
