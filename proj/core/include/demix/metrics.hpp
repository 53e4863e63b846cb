#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "demix/stem_set.hpp"
#include "demix/waveform.hpp"

namespace demix {

inline constexpr double kDefaultSdrEpsilon = 1e-9;

struct SdrOptions {
  /// Added to both signal and error energy.
  double epsilon = kDefaultSdrEpsilon;
  /// With epsilon == 0, a perfect estimate throws MetricError instead of
  /// returning +infinity.
  bool strict = false;
  /// Zero-pad length mismatches instead of rejecting them. Channel count and
  /// rate must still agree.
  bool pad_mismatched_lengths = false;
};

/// 10 * log10((sum s^2 + eps) / (sum (s - s_hat)^2 + eps)) over all channels
/// and samples.
double sdr(const Waveform& reference, const Waveform& estimate, const SdrOptions& options = {});
double sdr(const Waveform& reference, const Waveform& estimate, double epsilon);

struct RecordScore {
  std::map<std::string, double> stems;
  /// Arithmetic mean of `stems`.
  double mean = 0.0;
  /// Instrumental (mixture minus vocals) score, when the record has vocals.
  std::optional<double> instrumental;
  std::vector<std::string> warnings;
};

/// Scores every reference stem; extra estimate stems are ignored with a
/// warning, missing ones throw MetricError.
RecordScore sdr_record(const StemSet& references, const StemSet& estimates,
                       const SdrOptions& options = {});

struct SdrReport {
  /// Mean over records of each stem's score.
  std::map<std::string, double> per_stem;
  std::map<std::string, RecordScore> per_record;
  /// Mean of the per-record means (the canonical ranking score).
  double total = 0.0;
  double epsilon = kDefaultSdrEpsilon;
  std::size_t n_records = 0;
  /// Mean instrumental score over records that have one.
  std::optional<double> instrumental;
  /// Length padding, zero-scored missing stems, and similar events.
  std::vector<std::string> notes;

  /// Mean of the per-stem column means. Differs from `total` in general.
  double column_mean() const;
};

struct ScoredRecord {
  std::string id;
  StemSet references;
  StemSet estimates;
};

/// Aggregates record scores: per-record means first, then the dataset mean.
/// Reductions run in record-id order. Throws MetricError for an empty list.
SdrReport sdr_dataset(const std::vector<ScoredRecord>& records, const SdrOptions& options = {});

/// Builds a report from already-computed record scores.
SdrReport aggregate_scores(std::map<std::string, RecordScore> per_record, double epsilon);

/// mixture - vocals_ref: the reference for the instrumental column.
Waveform instrumental_reference(const Waveform& mixture, const Waveform& vocals_ref);

/// Fixed-width table with 2-decimal dB values.
std::string format_report_table(const SdrReport& report);

/// Machine-readable form; values keep full double precision.
nlohmann::json report_to_json(const SdrReport& report);
SdrReport report_from_json(const nlohmann::json& doc);

}  // namespace demix
