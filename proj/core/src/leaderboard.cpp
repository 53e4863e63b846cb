#include "demix/leaderboard.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "demix/error.hpp"

namespace demix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kBaseKeys = {"bass", "drums", "other", "vocals", kInstrumentalKey, kTotalKey};

json to_json(const LeaderboardEntry& e) {
  json doc{{"name", e.name}, {"per_stem", e.per_stem}, {"submitted_at", e.submitted_at}, {"notes", e.notes}};
  doc["instrumental"] = e.instrumental ? json(*e.instrumental) : json(nullptr);
  doc["total"] = e.total ? json(*e.total) : json(nullptr);
  return doc;
}

LeaderboardEntry from_json(const json& doc) {
  LeaderboardEntry e;
  e.name = doc.at("name").get<std::string>();
  e.per_stem = doc.at("per_stem").get<std::map<std::string, double>>();
  if (doc.contains("instrumental") && !doc["instrumental"].is_null()) e.instrumental = doc["instrumental"].get<double>();
  if (doc.contains("total") && !doc["total"].is_null()) e.total = doc["total"].get<double>();
  e.submitted_at = doc.at("submitted_at").get<std::string>();
  e.notes = doc.value("notes", std::string{});
  return e;
}

std::vector<LeaderboardEntry> parse_store(const fs::path& path) {
  std::vector<LeaderboardEntry> out;
  std::ifstream in(path);
  if (!in) {
    if (!fs::exists(path)) return out;
    throw LeaderboardError("cannot read leaderboard store " + path.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      LeaderboardEntry e = from_json(json::parse(line));
      validate_entry(e);
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw LeaderboardError(fmt::format("corrupt leaderboard store {} at line {}: {}", path.string(), lineno, ex.what()));
    }
  }
  return out;
}

std::optional<double> score_for(const LeaderboardEntry& e, const std::string& key) {
  if (key == kInstrumentalKey) return e.instrumental;
  if (key == kTotalKey) return e.total;
  auto it = e.per_stem.find(key);
  if (it == e.per_stem.end()) return std::nullopt;
  return it->second;
}

class FileLock {
 public:
  explicit FileLock(const fs::path& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644)) {
    if (fd_ < 0) throw LeaderboardError("cannot open leaderboard store " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw LeaderboardError("cannot lock leaderboard store " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  int fd() const noexcept { return fd_; }

 private:
  int fd_;
};

}  // namespace

void validate_entry(const LeaderboardEntry& e) {
  if (e.name.empty()) throw LeaderboardError("entry name is empty");
  for (const auto& [stem, v] : e.per_stem) {
    if (stem.empty()) throw LeaderboardError("entry '" + e.name + "' has an empty stem name");
    if (!std::isfinite(v)) throw LeaderboardError("entry '" + e.name + "': score for '" + stem + "' is not finite");
  }
  if (e.instrumental && !std::isfinite(*e.instrumental)) {
    throw LeaderboardError("entry '" + e.name + "': instrumental score is not finite");
  }
  if (e.total && !std::isfinite(*e.total)) throw LeaderboardError("entry '" + e.name + "': total is not finite");
  static const std::regex iso(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z)");
  if (!std::regex_match(e.submitted_at, iso)) {
    throw LeaderboardError("entry '" + e.name + "': submitted_at '" + e.submitted_at + "' is not ISO-8601 UTC");
  }
}

std::string utc_now_iso8601() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LeaderboardEntry entry_from_report(const std::string& name, const SdrReport& report, std::string notes,
                                   std::string submitted_at) {
  LeaderboardEntry e;
  e.name = name;
  e.per_stem = report.per_stem;
  e.instrumental = report.instrumental;
  e.total = report.total;
  e.submitted_at = submitted_at.empty() ? utc_now_iso8601() : std::move(submitted_at);
  e.notes = std::move(notes);
  validate_entry(e);
  return e;
}

void Leaderboard::append(const LeaderboardEntry& entry) const {
  validate_entry(entry);
  FileLock lock(store_);
  parse_store(store_);  // refuse to extend a corrupt file
  std::string line = to_json(entry).dump() + "\n";
  // A crash after a partial write would leave a line without its newline;
  // start on a fresh line if the file does not end in one.
  const off_t size = ::lseek(lock.fd(), 0, SEEK_END);
  if (size > 0) {
    char last = '\n';
    if (::pread(lock.fd(), &last, 1, size - 1) == 1 && last != '\n') line.insert(line.begin(), '\n');
  }
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(lock.fd(), p, left);
    if (n < 0) throw LeaderboardError("write to leaderboard store failed: " + store_.string());
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(lock.fd());
}

std::vector<LeaderboardEntry> Leaderboard::entries() const { return parse_store(store_); }

namespace {

std::vector<std::string> keys_for(const std::vector<LeaderboardEntry>& entries) {
  std::vector<std::string> keys = kBaseKeys;
  std::set<std::string> extra;
  for (const auto& e : entries) {
    for (const auto& [stem, v] : e.per_stem) {
      if (std::find(keys.begin(), keys.end(), stem) == keys.end()) extra.insert(stem);
    }
  }
  keys.insert(keys.end(), extra.begin(), extra.end());
  return keys;
}

void check_key(const std::vector<std::string>& keys, const std::string& key) {
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw LeaderboardError(fmt::format("unknown sort key '{}'; valid keys: {}", key, fmt::join(keys, ", ")));
  }
}

}  // namespace

std::vector<std::string> Leaderboard::sort_keys() const { return keys_for(entries()); }

std::vector<LeaderboardEntry> sort_entries(std::vector<LeaderboardEntry> entries, const std::string& key) {
  check_key(keys_for(entries), key);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::optional<double>> scores;
  for (const auto& e : entries) scores.push_back(score_for(e, key));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = scores[a];
    const auto& sb = scores[b];
    if (sa.has_value() != sb.has_value()) return sa.has_value();
    if (sa && *sa != *sb) return *sa > *sb;
    return entries[a].submitted_at < entries[b].submitted_at;
  });
  std::vector<LeaderboardEntry> out;
  out.reserve(entries.size());
  for (std::size_t i : order) out.push_back(std::move(entries[i]));
  return out;
}

std::vector<LeaderboardEntry> Leaderboard::view(const std::string& key) const { return sort_entries(entries(), key); }

std::string format_leaderboard(const std::vector<LeaderboardEntry>& ranked, const std::string& key) {
  std::vector<std::string> columns = {"bass", "drums", "other", "vocals"};
  std::set<std::string> extra;
  for (const auto& e : ranked) {
    for (const auto& [stem, v] : e.per_stem) {
      if (std::find(columns.begin(), columns.end(), stem) == columns.end()) extra.insert(stem);
    }
  }
  columns.insert(columns.end(), extra.begin(), extra.end());
  columns.push_back(kInstrumentalKey);
  columns.push_back(kTotalKey);

  auto header = [&](const std::string& c) { return c == key ? c + "*" : c; };
  std::string out = fmt::format("{:>4}  {:<32}", "#", "name");
  for (const auto& c : columns) out += fmt::format(" {:>8}", header(c));
  out += fmt::format("  {:<20}\n", "submitted_at");
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out += fmt::format("{:>4}  {:<32}", i + 1, ranked[i].name);
    for (const auto& c : columns) {
      const auto s = score_for(ranked[i], c);
      out += s ? fmt::format(" {:>8.2f}", *s) : fmt::format(" {:>8}", "-");
    }
    out += fmt::format("  {:<20}\n", ranked[i].submitted_at);
  }
  return out;
}

}  // namespace demix
