#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demix/metrics.hpp"

namespace demix {

struct LeaderboardEntry {
  std::string name;
  std::map<std::string, double> per_stem;
  std::optional<double> instrumental;
  std::optional<double> total;
  /// ISO-8601 UTC, e.g. "2023-05-01T12:00:00Z". Lexicographic order is
  /// chronological order.
  std::string submitted_at;
  std::string notes;
};

/// Throws LeaderboardError unless the name is nonempty, every score finite
/// and the timestamp well formed.
void validate_entry(const LeaderboardEntry& entry);

/// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_now_iso8601();

/// Entry from an evaluation report; submitted_at defaults to now.
LeaderboardEntry entry_from_report(const std::string& name, const SdrReport& report, std::string notes = {},
                                   std::string submitted_at = {});

/// Sort key that aliases the instrumental column.
inline constexpr const char* kInstrumentalKey = "instrum";
inline constexpr const char* kTotalKey = "total";

/// Append-only JSON-lines file. Writers hold an exclusive advisory lock;
/// readers parse a snapshot. A file with any unparsable line is treated as
/// corrupt: reads throw and writes are refused without touching the file.
class Leaderboard {
 public:
  explicit Leaderboard(std::filesystem::path store) : store_(std::move(store)) {}

  const std::filesystem::path& path() const noexcept { return store_; }

  /// Validates and appends one line.
  void append(const LeaderboardEntry& entry) const;

  /// All entries in insertion order. A missing store is empty.
  std::vector<LeaderboardEntry> entries() const;

  /// "bass", "drums", "other", "vocals", "instrum", "total", plus any
  /// other stem present in the store.
  std::vector<std::string> sort_keys() const;

  /// Descending by `key`. Entries without that score come last; ties go to
  /// the earlier submission, then to insertion order. Throws
  /// LeaderboardError listing the valid keys for an unknown key.
  std::vector<LeaderboardEntry> view(const std::string& key) const;

 private:
  std::filesystem::path store_;
};

/// Sorts `entries` exactly as Leaderboard::view does.
std::vector<LeaderboardEntry> sort_entries(std::vector<LeaderboardEntry> entries, const std::string& key);

/// Ranked table; the sorted column is marked with '*'.
std::string format_leaderboard(const std::vector<LeaderboardEntry>& ranked, const std::string& key);

}  // namespace demix
