#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demix/parallel.hpp"
#include "demix/stem_set.hpp"
#include "demix/waveform.hpp"

namespace demix {

enum class BackendKind { kExternal, kOracle, kLinearBand, kPassthrough };
enum class OutputMode {
  kDirect,
  /// The model predicts what is *not* the stem; the stem is input - output.
  kComplement,
};

/// Declarative description of one separator.
struct SeparatorSpec {
  std::string name;
  BackendKind kind = BackendKind::kPassthrough;
  OutputMode output_mode = OutputMode::kDirect;
  std::vector<std::string> produced_stems;
  std::optional<std::string> checkpoint_tag;

  // external
  /// argv with {input} and {output_dir} placeholders, substituted anywhere in a token.
  std::vector<std::string> command;
  double timeout_seconds = 600.0;
  /// Channel count the model expects (0 = whatever it is given). A mono
  /// input to a stereo model is duplicated on the way in and averaged on
  /// the way out.
  std::size_t channels = 0;

  // oracle
  /// +infinity gives exact ground truth.
  double noise_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  // linear_band
  /// Radius of the narrowest moving-average smoother.
  std::size_t band_radius = 8;

  /// Run each call twice and fail if the outputs differ bit-wise.
  bool verify_determinism = false;
};

std::string to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

/// Ground truth of one record, needed by oracle backends.
struct GroundTruth {
  Waveform mixture;
  StemSet stems;
};

/// Raw model: maps an input segment to stems. `origin` is the index of
/// input sample 0 within the full-length signal being processed (negative
/// inside shift padding); only oracle backends use it.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual StemSet infer(const Waveform& input, std::ptrdiff_t origin) const = 0;
};

/// A backend bound to its spec. Applies complement mode, verifies output
/// stems and shapes, and optionally checks determinism.
class Separator {
 public:
  Separator(SeparatorSpec spec, std::shared_ptr<const Backend> backend);

  const SeparatorSpec& spec() const noexcept { return spec_; }

  StemSet separate(const Waveform& input, std::ptrdiff_t origin = 0) const;

 private:
  SeparatorSpec spec_;
  std::shared_ptr<const Backend> backend_;
};

/// Builds the backend a spec describes. Oracle specs need `truth`; the other
/// kinds ignore it. Throws ConfigError for invalid specs.
Separator make_separator(const SeparatorSpec& spec, std::shared_ptr<const GroundTruth> truth = nullptr);

/// Throws ConfigError describing the first problem with `spec`.
void validate_spec(const SeparatorSpec& spec);

/// One-shot convenience: make_separator(spec, truth).separate(mixture).
StemSet separate(const SeparatorSpec& spec, const Waveform& mixture,
                 std::shared_ptr<const GroundTruth> truth = nullptr);

/// mixture - predicted.
Waveform complement_output(const Waveform& mixture, const Waveform& predicted);

struct ChunkParams {
  /// 0 means one chunk covering the whole signal.
  std::size_t chunk_len = 0;
  double overlap = 0.0;
  std::size_t shifts = 1;
  std::size_t max_shift = 0;
};

/// Chunked, shift-averaged inference. Shift j of `shifts` delays the input by
/// floor(j * max_shift / shifts) samples (so shifts = 1 is a single unshifted
/// pass); each pass is split per plan_chunks, separated, overlap-added and
/// realigned, and the aligned passes are averaged. A padded signal that fits
/// in one chunk is separated in a single call without extra padding.
StemSet chunked_separate(const Separator& separator, const Waveform& mixture, const ChunkParams& params,
                         const ExecOptions& exec = {});

/// 0.5 * f(x) + 0.5 * (-f(-x)) for every stem, f = chunked_separate.
StemSet tta_polarity_all(const Separator& separator, const Waveform& mixture, const ChunkParams& params,
                         const ExecOptions& exec = {});

/// tta_polarity_all restricted to `stem`.
Waveform tta_polarity(const Separator& separator, const Waveform& mixture, const std::string& stem,
                      const ChunkParams& params, const ExecOptions& exec = {});

/// Unweighted mean of each separator's `stem`.
Waveform average_checkpoints(std::span<const Separator> separators, const Waveform& mixture,
                             const std::string& stem, const ChunkParams& params, const ExecOptions& exec = {});

}  // namespace demix
