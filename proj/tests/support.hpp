#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demix/leaderboard.hpp"
#include "demix/separator.hpp"
#include "demix/waveform.hpp"

namespace demix::testing {

/// Uniform samples in [-amp, amp].
inline Waveform random_waveform(std::size_t channels, std::size_t length, std::uint64_t seed, double amp = 0.5,
                                unsigned rate = 44100) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  std::vector<std::vector<double>> ch(channels, std::vector<double>(length));
  for (auto& c : ch) {
    for (double& x : c) x = dist(rng);
  }
  return Waveform(std::move(ch), rate);
}

inline Waveform constant_waveform(double value, std::size_t length, std::size_t channels = 1) {
  return Waveform(std::vector<std::vector<double>>(channels, std::vector<double>(length, value)), 44100);
}

/// Directory removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag = "demix-test") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Random stems with mixture = sum of stems.
inline std::shared_ptr<GroundTruth> random_truth(const std::vector<std::string>& stems, std::size_t channels,
                                                 std::size_t length, std::uint64_t seed) {
  auto gt = std::make_shared<GroundTruth>();
  Waveform mix(channels, length, 44100);
  std::uint64_t s = seed;
  for (const auto& name : stems) {
    Waveform w = random_waveform(channels, length, ++s * 7919, 0.3);
    mix += w;
    gt->stems.set(name, std::move(w));
  }
  gt->mixture = std::move(mix);
  return gt;
}

inline SeparatorSpec oracle_spec(const std::string& name, std::vector<std::string> stems, double snr_db,
                                 std::uint64_t seed) {
  SeparatorSpec s;
  s.name = name;
  s.kind = BackendKind::kOracle;
  s.produced_stems = std::move(stems);
  s.noise_snr_db = snr_db;
  s.seed = seed;
  return s;
}

inline SeparatorSpec simple_spec(BackendKind kind, std::vector<std::string> stems, const std::string& name = "b") {
  SeparatorSpec s;
  s.name = name;
  s.kind = kind;
  s.produced_stems = std::move(stems);
  return s;
}

/// Sum of squared sample differences, computed by direct loop.
inline double error_energy(const Waveform& a, const Waveform& b) {
  double e = 0.0;
  for (std::size_t c = 0; c < a.num_channels(); ++c) {
    for (std::size_t n = 0; n < a.length(); ++n) {
      const double d = a.at(c, n) - b.at(c, n);
      e += d * d;
    }
  }
  return e;
}

/// Rows of one table in data/reference_results.json as leaderboard entries.
inline std::vector<LeaderboardEntry> fixture_table(const std::string& table) {
  std::ifstream in(std::filesystem::path(DEMIX_DATA_DIR) / "reference_results.json");
  const auto doc = nlohmann::json::parse(in);
  std::vector<LeaderboardEntry> out;
  for (const auto& row : doc.at("tables").at(table).at("rows")) {
    LeaderboardEntry e;
    e.name = row.at("name").get<std::string>();
    e.submitted_at = row.at("submitted_at").get<std::string>();
    for (const auto& [key, value] : row.at("scores").items()) {
      if (key == kInstrumentalKey) {
        e.instrumental = value.get<double>();
      } else if (key == kTotalKey) {
        e.total = value.get<double>();
      } else {
        e.per_stem[key] = value.get<double>();
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Positions of `ranked` entries within `original`, matched by name.
inline std::vector<std::size_t> rank_positions(const std::vector<LeaderboardEntry>& original,
                                               const std::vector<LeaderboardEntry>& ranked) {
  std::vector<std::size_t> out;
  for (const auto& r : ranked) {
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (original[i].name == r.name && original[i].submitted_at == r.submitted_at) out.push_back(i);
    }
  }
  return out;
}

}  // namespace demix::testing
