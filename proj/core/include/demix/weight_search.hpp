#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "demix/ensemble.hpp"
#include "demix/parallel.hpp"
#include "demix/separator.hpp"
#include "demix/waveform.hpp"

namespace demix {

struct CandidateRecord {
  std::string id;
  Waveform reference;
  /// One estimate per backend, in the problem's backend order.
  std::vector<Waveform> estimates;
};

/// Precomputed backend outputs for one stem. Searching never re-runs a model.
struct WeightSearchProblem {
  std::string stem;
  double epsilon = 1e-9;
  std::vector<std::string> backend_names;
  std::vector<CandidateRecord> records;

  std::size_t dimensions() const noexcept { return backend_names.size(); }
  /// Throws ConfigError on an empty problem or inconsistent shapes.
  void validate() const;
};

struct ScoredWeights {
  WeightVector weights;
  double score = 0.0;
};

/// Mean over records of sdr(reference, blend_weighted(estimates, w)).
double score_weights(const WeightSearchProblem& problem, const WeightVector& w);

struct GridResult {
  ScoredWeights best;
  /// Every distinct grid point, best first. Equal scores are ordered by the
  /// lexicographically smaller weight vector.
  std::vector<ScoredWeights> table;
};

/// All vectors whose coordinate i is drawn from grid[i]. Points that are
/// all zero are skipped; points proportional to an earlier one are evaluated
/// once under their lexicographically smallest representative.
GridResult grid_search(const WeightSearchProblem& problem, const std::vector<std::vector<double>>& grid,
                       const ExecOptions& exec = {});

/// `dims` copies of {lo, lo + 1, ..., hi}.
std::vector<std::vector<double>> integer_grid(std::size_t dims, int lo = 0, int hi = 20);

/// For each step in `steps`, sweeps coordinates trying +step and -step and
/// keeps strict improvements, until a sweep improves nothing or `max_rounds`
/// sweeps have run. The returned score is never below the initial one.
ScoredWeights coordinate_ascent(const WeightSearchProblem& problem, const WeightVector& init,
                                const std::vector<double>& steps, std::size_t max_rounds = 50);

/// Directory of float32 WAVs plus index.json.
void save_problem_cache(const WeightSearchProblem& problem, const std::filesystem::path& dir);
WeightSearchProblem load_problem_cache(const std::filesystem::path& dir);

struct TruthRecord {
  std::string id;
  std::shared_ptr<const GroundTruth> truth;
};

/// Runs every member of `cfg` once per record and collects one problem per
/// searchable stem: the vocal stem over vocal members, and for MDX configs
/// bass, drums and other over instrument members applied to
/// mixture - blended vocals (using cfg's vocal weights).
std::map<std::string, WeightSearchProblem> build_problems(const PipelineConfig& cfg,
                                                          const std::vector<TruthRecord>& records,
                                                          double epsilon = 1e-9, const ExecOptions& exec = {});

/// Ranked table, one row per vector.
std::string format_ranked_table(const WeightSearchProblem& problem, const std::vector<ScoredWeights>& rows,
                                std::size_t limit = 20);

}  // namespace demix
