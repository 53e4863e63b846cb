#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "demix/parallel.hpp"
#include "demix/separator.hpp"
#include "demix/stem_set.hpp"
#include "demix/waveform.hpp"

namespace demix {

/// Non-negative blend weights with a positive sum.
class WeightVector {
 public:
  WeightVector() : weights_{1.0} {}
  /// Throws ConfigError on empty input, negative or non-finite entries, or a zero sum.
  explicit WeightVector(std::vector<double> weights);

  std::span<const double> values() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_.at(i); }
  double sum() const noexcept;
  /// w_i / sum(w). Proportional vectors give identical results.
  std::vector<double> normalized() const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
  friend auto operator<=>(const WeightVector& a, const WeightVector& b) { return a.weights_ <=> b.weights_; }

 private:
  std::vector<double> weights_;
};

std::string to_string(const WeightVector& w);

/// Normalised weighted mean sum(w_i * est_i) / sum(w_i). The output is
/// clamped to the sample-wise range of the inputs, which only absorbs
/// rounding.
Waveform blend_weighted(std::span<const Waveform> estimates, const WeightVector& weights);

/// Chunking settings in seconds; converted per signal rate.
struct ChunkSettings {
  /// <= 0 means a single chunk over the whole signal.
  double chunk_seconds = 10.0;
  double overlap = 0.25;
  std::size_t shifts = 1;
  double max_shift_seconds = 0.5;

  ChunkParams to_params(unsigned sample_rate) const;
};

enum class Polarity {
  kNormal,
  /// -f(-x) only.
  kInverted,
  /// 0.5 f(x) + 0.5 (-f(-x)).
  kBoth,
};

struct StageMember {
  SeparatorSpec spec;
  ChunkSettings chunking;
  Polarity polarity = Polarity::kNormal;
};

enum class PipelineKind {
  kMdx,
  kCdx,
  /// One backend whose stems are the output; vocal_members holds it.
  kSingle,
};

/// Two-stage ensemble: a weighted vocal (or dialog) stage whose output is
/// subtracted from the mixture, then a second stage on the remainder. For
/// MDX the second stage blends bass/drums/other per stem and reconstructs;
/// for CDX the residual models' checkpoints are averaged with equal weight.
struct PipelineConfig {
  std::string name;
  PipelineKind kind = PipelineKind::kMdx;
  std::string vocal_stem = "vocals";
  std::vector<StageMember> vocal_members;
  WeightVector vocal_weights;
  /// MDX instrument models, or CDX residual checkpoints.
  std::vector<StageMember> instrument_members;
  /// MDX only: one vector per bass/drums/other, indexed like instrument_members.
  std::map<std::string, WeightVector> instrument_weights;
  /// CDX only: stems taken from the residual models.
  std::vector<std::string> residual_stems;
  bool reconstruct = true;
  /// Replace the reconstructed "other" with instr - bass - drums.
  bool strict_conservation = false;

  /// Stem vocabulary of the pipeline output.
  std::vector<std::string> output_stems() const;
  /// Throws ConfigError describing the first inconsistency.
  void validate() const;
};

inline const std::vector<std::string> kInstrumentStems = {"bass", "drums", "other"};

struct RunContext {
  /// Needed only when the config contains oracle backends.
  std::shared_ptr<const GroundTruth> truth;
  ExecOptions exec;
};

/// One member's stems on `input`, honouring its chunking and polarity settings.
StemSet run_member(const StageMember& member, const Waveform& input, const RunContext& ctx);

struct VocalStageResult {
  Waveform vocals;
  Waveform instr;
  /// Each member's vocal estimate, in member order.
  std::vector<Waveform> member_estimates;
};

/// Blends the members' vocal estimates and subtracts the blend from the mixture.
VocalStageResult vocal_stage(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx);

struct InstrumentStems {
  Waveform bass;
  Waveform drums;
  Waveform other;
};

/// Each instrument member's stems on `instr`, in member order.
std::vector<StemSet> instrument_member_outputs(const PipelineConfig& cfg, const Waveform& instr,
                                               const RunContext& ctx);

/// Per-stem weighted blends of already-computed member outputs.
InstrumentStems bars_from_outputs(const PipelineConfig& cfg, std::span<const StemSet> outputs);

/// instrument_member_outputs followed by bars_from_outputs.
InstrumentStems instrument_bars(const PipelineConfig& cfg, const Waveform& instr, const RunContext& ctx);

/// bass  = (instr - other_bar - drums_bar + 2 bass_bar) / 3
/// drums = (instr - other_bar - bass_bar + 2 drums_bar) / 3
/// other = (2 instr - bass_bar - drums_bar + other_bar) / 3
/// The third line does not conserve the stem sum; see strict_conservation.
InstrumentStems reconstruct_final(const Waveform& instr, const InstrumentStems& bars);

StemSet run_mdx_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx = {});
StemSet run_cdx_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx = {});
StemSet run_single_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx = {});
/// Dispatches on cfg.kind.
StemSet run_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx = {});

}  // namespace demix
