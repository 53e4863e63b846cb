#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "demix/metrics.hpp"
#include "demix/parallel.hpp"
#include "demix/separator.hpp"

namespace demix {

/// One track folder: <root>/<id>/mixture.wav plus one WAV per stem.
struct DatasetRecord {
  std::string id;
  std::filesystem::path dir;
  std::filesystem::path mixture_path;
  std::map<std::string, std::filesystem::path> stem_paths;
  double duration_s = 0.0;
  unsigned sample_rate = 0;
  std::size_t length = 0;
  std::size_t channels = 0;
};

inline constexpr const char* kMixtureFile = "mixture.wav";

struct ScanOptions {
  /// Required stems. Empty means: take the stems of the first track folder
  /// and require them everywhere.
  std::vector<std::string> stems;
  /// Throw on the first bad folder instead of skipping it.
  bool strict = false;
  /// Only require mixture.wav; stem files are neither checked nor listed.
  bool mixture_only = false;
};

struct SkippedRecord {
  std::string id;
  std::string reason;
};

struct ScanResult {
  std::vector<DatasetRecord> records;
  std::vector<SkippedRecord> skipped;
  std::vector<std::string> stems;
};

/// Lists track folders in lexicographic order. Only headers are read.
/// Throws DatasetError if `root` is not a directory, or for any bad folder
/// in strict mode.
ScanResult scan_dataset(const std::filesystem::path& root, const ScanOptions& options = {});

/// Decodes every file of a record.
GroundTruth load_record(const DatasetRecord& record);

enum class MissingPolicy {
  kError,
  /// Score a missing stem against silence and note it in the report.
  kZeros,
};

struct EvaluateOptions {
  SdrOptions sdr;
  MissingPolicy missing = MissingPolicy::kError;
  ExecOptions exec;
};

inline constexpr const char* kInstrumentalFile = "instrum.wav";

/// Scores <predictions>/<id>/<stem>.wav against each record. Records with a
/// vocals stem also get an instrumental score: the reference is
/// mixture - vocals, the estimate is instrum.wav when present, else
/// mixture - predicted vocals. Never writes to either directory.
SdrReport evaluate_submission(const std::vector<DatasetRecord>& records, const std::filesystem::path& predictions,
                              const EvaluateOptions& options = {});

}  // namespace demix
