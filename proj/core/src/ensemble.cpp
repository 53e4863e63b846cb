#include "demix/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "demix/error.hpp"

namespace demix {

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ConfigError("weight vector is empty");
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("weights must be finite and non-negative");
  }
  if (!(sum() > 0.0)) throw ConfigError("weights sum to zero");
}

double WeightVector::sum() const noexcept {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

std::vector<double> WeightVector::normalized() const {
  const double total = sum();
  std::vector<double> out;
  out.reserve(weights_.size());
  for (double w : weights_) out.push_back(w / total);
  return out;
}

std::string to_string(const WeightVector& w) {
  std::string out = "(";
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ", ";
    out += fmt::format("{:g}", w[i]);
  }
  return out + ")";
}

Waveform blend_weighted(std::span<const Waveform> estimates, const WeightVector& weights) {
  if (estimates.size() != weights.size()) {
    throw ConfigError(fmt::format("blend_weighted: {} estimates but {} weights", estimates.size(), weights.size()));
  }
  const std::vector<double> coeffs = weights.normalized();
  Waveform out = mix_linear(estimates, coeffs);
  for (std::size_t c = 0; c < out.num_channels(); ++c) {
    auto dst = out.channel(c);
    for (std::size_t n = 0; n < dst.size(); ++n) {
      double lo = estimates.front().at(c, n);
      double hi = lo;
      for (const auto& e : estimates.subspan(1)) {
        lo = std::min(lo, e.at(c, n));
        hi = std::max(hi, e.at(c, n));
      }
      dst[n] = std::clamp(dst[n], lo, hi);
    }
  }
  return out;
}

ChunkParams ChunkSettings::to_params(unsigned sample_rate) const {
  ChunkParams p;
  p.chunk_len = chunk_seconds > 0 ? static_cast<std::size_t>(std::llround(chunk_seconds * sample_rate)) : 0;
  p.overlap = overlap;
  p.shifts = shifts;
  p.max_shift = static_cast<std::size_t>(std::llround(std::max(0.0, max_shift_seconds) * sample_rate));
  return p;
}

std::vector<std::string> PipelineConfig::output_stems() const {
  if (kind == PipelineKind::kSingle) {
    return vocal_members.empty() ? std::vector<std::string>{} : vocal_members.front().spec.produced_stems;
  }
  std::vector<std::string> out{vocal_stem};
  if (kind == PipelineKind::kMdx) {
    out.insert(out.end(), kInstrumentStems.begin(), kInstrumentStems.end());
  } else {
    out.insert(out.end(), residual_stems.begin(), residual_stems.end());
  }
  return out;
}

namespace {

bool produces(const StageMember& m, const std::string& stem) {
  const auto& s = m.spec.produced_stems;
  return std::find(s.begin(), s.end(), stem) != s.end();
}

void check_chunking(const StageMember& m) {
  const auto& c = m.chunking;
  if (!(c.overlap >= 0.0 && c.overlap < 1.0)) {
    throw ConfigError("backend '" + m.spec.name + "': overlap must lie in [0, 1)");
  }
  if (c.shifts == 0) throw ConfigError("backend '" + m.spec.name + "': shifts must be at least 1");
}

}  // namespace

void PipelineConfig::validate() const {
  if (kind == PipelineKind::kSingle) {
    if (vocal_members.size() != 1) throw ConfigError("single pipeline needs exactly one backend");
    if (!instrument_members.empty()) throw ConfigError("single pipeline takes no second stage");
    validate_spec(vocal_members.front().spec);
    check_chunking(vocal_members.front());
    return;
  }
  if (vocal_stem.empty()) throw ConfigError("vocal stem name is empty");
  if (vocal_members.empty()) throw ConfigError("vocal stage has no backends");
  if (vocal_weights.size() != vocal_members.size()) {
    throw ConfigError(fmt::format("vocal stage has {} backends but {} weights", vocal_members.size(),
                                  vocal_weights.size()));
  }
  for (const auto& m : vocal_members) {
    validate_spec(m.spec);
    check_chunking(m);
    if (!produces(m, vocal_stem)) {
      throw ConfigError("vocal backend '" + m.spec.name + "' does not produce '" + vocal_stem + "'");
    }
  }
  if (instrument_members.empty()) throw ConfigError("second stage has no backends");
  for (const auto& m : instrument_members) {
    validate_spec(m.spec);
    check_chunking(m);
  }

  if (kind == PipelineKind::kMdx) {
    for (const auto& stem : kInstrumentStems) {
      auto it = instrument_weights.find(stem);
      if (it == instrument_weights.end()) throw ConfigError("missing instrument weights for '" + stem + "'");
      if (it->second.size() != instrument_members.size()) {
        throw ConfigError(fmt::format("'{}' has {} weights for {} instrument backends", stem, it->second.size(),
                                      instrument_members.size()));
      }
      for (const auto& m : instrument_members) {
        if (!produces(m, stem)) {
          throw ConfigError("instrument backend '" + m.spec.name + "' does not produce '" + stem + "'");
        }
      }
    }
    for (const auto& [stem, w] : instrument_weights) {
      if (std::find(kInstrumentStems.begin(), kInstrumentStems.end(), stem) == kInstrumentStems.end()) {
        throw ConfigError("instrument weights given for unknown stem '" + stem + "'");
      }
    }
  } else {
    if (residual_stems.empty()) throw ConfigError("CDX pipeline declares no residual stems");
    std::set<std::string> seen{vocal_stem};
    for (const auto& stem : residual_stems) {
      if (!seen.insert(stem).second) throw ConfigError("stem '" + stem + "' declared twice");
      const bool any = std::any_of(instrument_members.begin(), instrument_members.end(),
                                   [&](const StageMember& m) { return produces(m, stem); });
      if (!any) throw ConfigError("no residual backend produces '" + stem + "'");
    }
  }
}

StemSet run_member(const StageMember& member, const Waveform& input, const RunContext& ctx) {
  const Separator sep = make_separator(member.spec, ctx.truth);
  const ChunkParams params = member.chunking.to_params(input.sample_rate());
  switch (member.polarity) {
    case Polarity::kNormal:
      return chunked_separate(sep, input, params, ctx.exec);
    case Polarity::kInverted: {
      StemSet raw = chunked_separate(sep, polarity_invert(input), params, ctx.exec);
      StemSet out;
      for (const auto& [stem, w] : raw) out.set(stem, polarity_invert(w));
      return out;
    }
    case Polarity::kBoth:
      return tta_polarity_all(sep, input, params, ctx.exec);
  }
  throw ConfigError("unhandled polarity mode");
}

VocalStageResult vocal_stage(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx) {
  if (cfg.vocal_members.empty()) throw ConfigError("vocal stage has no backends");
  VocalStageResult result;
  result.member_estimates.resize(cfg.vocal_members.size());
  parallel_for(cfg.vocal_members.size(), ctx.exec.jobs, [&](std::size_t i) {
    result.member_estimates[i] = run_member(cfg.vocal_members[i], mixture, ctx).at(cfg.vocal_stem);
  });
  result.vocals = blend_weighted(result.member_estimates, cfg.vocal_weights);
  result.instr = mixture - result.vocals;
  return result;
}

std::vector<StemSet> instrument_member_outputs(const PipelineConfig& cfg, const Waveform& instr,
                                               const RunContext& ctx) {
  std::vector<StemSet> outputs(cfg.instrument_members.size());
  parallel_for(outputs.size(), ctx.exec.jobs,
               [&](std::size_t i) { outputs[i] = run_member(cfg.instrument_members[i], instr, ctx); });
  return outputs;
}

InstrumentStems bars_from_outputs(const PipelineConfig& cfg, std::span<const StemSet> outputs) {
  if (outputs.size() != cfg.instrument_members.size()) {
    throw ConfigError("instrument output count does not match the backend list");
  }
  auto bar = [&](const std::string& stem) {
    std::vector<Waveform> ests;
    ests.reserve(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (!outputs[i].contains(stem)) {
        throw BackendError("instrument backend '" + cfg.instrument_members[i].spec.name + "' produced no '" +
                           stem + "'");
      }
      ests.push_back(outputs[i].at(stem));
    }
    auto it = cfg.instrument_weights.find(stem);
    if (it == cfg.instrument_weights.end()) throw ConfigError("missing instrument weights for '" + stem + "'");
    return blend_weighted(ests, it->second);
  };
  return InstrumentStems{bar("bass"), bar("drums"), bar("other")};
}

InstrumentStems instrument_bars(const PipelineConfig& cfg, const Waveform& instr, const RunContext& ctx) {
  const auto outputs = instrument_member_outputs(cfg, instr, ctx);
  return bars_from_outputs(cfg, outputs);
}

InstrumentStems reconstruct_final(const Waveform& instr, const InstrumentStems& bars) {
  require_same_shape(instr, bars.bass, "reconstruct_final");
  require_same_shape(instr, bars.drums, "reconstruct_final");
  require_same_shape(instr, bars.other, "reconstruct_final");
  InstrumentStems out{Waveform(instr.num_channels(), instr.length(), instr.sample_rate()),
                      Waveform(instr.num_channels(), instr.length(), instr.sample_rate()),
                      Waveform(instr.num_channels(), instr.length(), instr.sample_rate())};
  for (std::size_t c = 0; c < instr.num_channels(); ++c) {
    auto x = instr.channel(c);
    auto b = bars.bass.channel(c);
    auto d = bars.drums.channel(c);
    auto o = bars.other.channel(c);
    auto ob = out.bass.channel(c);
    auto od = out.drums.channel(c);
    auto oo = out.other.channel(c);
    for (std::size_t n = 0; n < x.size(); ++n) {
      ob[n] = (x[n] - o[n] - d[n] + 2.0 * b[n]) / 3.0;
      od[n] = (x[n] - o[n] - b[n] + 2.0 * d[n]) / 3.0;
      oo[n] = (2.0 * x[n] - b[n] - d[n] + o[n]) / 3.0;
    }
  }
  return out;
}

StemSet run_mdx_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx) {
  if (cfg.kind != PipelineKind::kMdx) throw ConfigError("config '" + cfg.name + "' is not an MDX pipeline");
  cfg.validate();
  VocalStageResult vs = vocal_stage(cfg, mixture, ctx);
  const InstrumentStems bars = instrument_bars(cfg, vs.instr, ctx);

  StemSet out;
  out.set(cfg.vocal_stem, std::move(vs.vocals));
  if (!cfg.reconstruct) {
    out.set("bass", bars.bass);
    out.set("drums", bars.drums);
    out.set("other", bars.other);
    return out;
  }
  InstrumentStems final_stems = reconstruct_final(vs.instr, bars);
  if (cfg.strict_conservation) final_stems.other = vs.instr - final_stems.bass - final_stems.drums;
  out.set("bass", std::move(final_stems.bass));
  out.set("drums", std::move(final_stems.drums));
  out.set("other", std::move(final_stems.other));
  return out;
}

StemSet run_cdx_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx) {
  if (cfg.kind != PipelineKind::kCdx) throw ConfigError("config '" + cfg.name + "' is not a CDX pipeline");
  cfg.validate();
  VocalStageResult vs = vocal_stage(cfg, mixture, ctx);
  const auto outputs = instrument_member_outputs(cfg, vs.instr, ctx);

  StemSet out;
  out.set(cfg.vocal_stem, std::move(vs.vocals));
  for (const auto& stem : cfg.residual_stems) {
    std::vector<const Waveform*> ests;
    for (const auto& o : outputs) {
      if (o.contains(stem)) ests.push_back(&o.at(stem));
    }
    Waveform acc = *ests.front();
    for (std::size_t i = 1; i < ests.size(); ++i) acc += *ests[i];
    acc *= 1.0 / static_cast<double>(ests.size());
    out.set(stem, std::move(acc));
  }
  return out;
}

StemSet run_single_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx) {
  if (cfg.kind != PipelineKind::kSingle) throw ConfigError("config '" + cfg.name + "' is not a single-backend pipeline");
  cfg.validate();
  return run_member(cfg.vocal_members.front(), mixture, ctx);
}

StemSet run_pipeline(const PipelineConfig& cfg, const Waveform& mixture, const RunContext& ctx) {
  switch (cfg.kind) {
    case PipelineKind::kMdx: return run_mdx_pipeline(cfg, mixture, ctx);
    case PipelineKind::kCdx: return run_cdx_pipeline(cfg, mixture, ctx);
    case PipelineKind::kSingle: return run_single_pipeline(cfg, mixture, ctx);
  }
  throw ConfigError("unhandled pipeline kind");
}

}  // namespace demix
