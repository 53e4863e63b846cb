#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "demix/waveform.hpp"

namespace demix {

enum class WavEncoding { kPcm16, kPcm24, kFloat32 };

/// Header facts, available without decoding the data chunk.
struct WavInfo {
  WavEncoding encoding;
  unsigned sample_rate;
  std::size_t num_channels;
  std::size_t length;  // frames
};

struct SaveResult {
  /// Samples outside [-1, 1] that were clipped under an integer encoding.
  std::size_t clipped = 0;
};

/// Reads RIFF/WAVE with 16/24-bit integer PCM or 32-bit IEEE float samples
/// (plain or WAVE_FORMAT_EXTENSIBLE). Integer samples are divided by
/// 2^(bits-1). Throws WavError whose kind() distinguishes malformed headers,
/// unsupported encodings and truncated data.
Waveform load_wav(const std::filesystem::path& path);

/// Parses only the header chunks.
WavInfo probe_wav(const std::filesystem::path& path);

/// Writes `w`. Integer encodings scale by 2^(bits-1), round to nearest and
/// clip to the representable range; samples with |x| > 1 are counted.
SaveResult save_wav(const Waveform& w, const std::filesystem::path& path,
                    WavEncoding encoding = WavEncoding::kFloat32);

/// The samples load_wav would return after save_wav(w, path, encoding).
Waveform quantize(const Waveform& w, WavEncoding encoding);

/// Parses "pcm16" / "pcm24" / "float32".
WavEncoding parse_wav_encoding(std::string_view name);

}  // namespace demix
