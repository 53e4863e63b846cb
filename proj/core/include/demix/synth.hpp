#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demix/dataset.hpp"
#include "demix/wav_io.hpp"
#include "demix/waveform.hpp"

namespace demix {

/// Candidate source recordings for one stem.
struct SourcePool {
  std::string stem;
  std::vector<Waveform> sources;
  std::vector<std::string> labels;
};

/// Every *.wav directly inside `dir`, in lexicographic order. Throws
/// DatasetError for an empty or unreadable pool.
SourcePool load_source_pool(const std::string& stem, const std::filesystem::path& dir);

/// Seeded synthetic sources whose character depends on the stem name
/// (vocals, bass, drums, other, instrumental; anything else gets a generic
/// tone-plus-noise texture).
SourcePool procedural_pool(const std::string& stem, std::size_t count, double duration_s, unsigned sample_rate,
                           std::size_t channels, std::uint64_t seed);

struct SynthOptions {
  std::size_t n_tracks = 100;
  double duration_s = 60.0;
  unsigned sample_rate = kDefaultSampleRate;
  std::size_t channels = 2;
  std::uint64_t seed = 0;
  double source_peak = 0.7;
  double mixture_peak = 0.9;
  /// Equal-power crossfade used when a short source is looped.
  double crossfade_s = 0.05;
  WavEncoding encoding = WavEncoding::kFloat32;
  std::string id_prefix = "track";
};

/// Writes <out_dir>/<id>/{mixture.wav, <stem>.wav...} plus sources.json.
/// For each track and pool a source and trim offset are drawn from
/// mt19937_64(seed); the source is trimmed or looped to the exact length and
/// peak-normalised, the mixture is the stem sum scaled to mixture_peak, and
/// the same gain is applied to every stem. Stems are quantised to the file
/// encoding before summing, so the stored mixture equals the stored stems'
/// sum up to one rounding of the mixture itself. Mono sources are
/// duplicated to stereo; wider sources are rejected. Output is
/// byte-identical for a fixed seed. Refuses to overwrite existing tracks.
std::vector<DatasetRecord> make_synthetic_dataset(const std::vector<SourcePool>& pools, const SynthOptions& options,
                                                  const std::filesystem::path& out_dir);

/// Two-stem (vocals, instrumental) variant reading both pools from disk.
std::vector<DatasetRecord> make_synthetic_dataset(const std::filesystem::path& vocal_pool,
                                                  const std::filesystem::path& instr_pool,
                                                  const SynthOptions& options, const std::filesystem::path& out_dir);

/// Trims or loops `source` to `length` samples starting at `offset`.
/// Loop seams are crossfaded over `crossfade` samples with sin/cos gains.
Waveform fit_length(const Waveform& source, std::size_t length, std::size_t offset, std::size_t crossfade);

}  // namespace demix
