#include "demix/separator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "demix/chunking.hpp"
#include "demix/error.hpp"
#include "demix/noise.hpp"
#include "demix/wav_io.hpp"
#include "subprocess.hpp"

namespace demix {

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kExternal: return "external";
    case BackendKind::kOracle: return "oracle";
    case BackendKind::kLinearBand: return "linear_band";
    case BackendKind::kPassthrough: return "passthrough";
  }
  return "unknown";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "external") return BackendKind::kExternal;
  if (text == "oracle") return BackendKind::kOracle;
  if (text == "linear_band") return BackendKind::kLinearBand;
  if (text == "passthrough") return BackendKind::kPassthrough;
  throw ConfigError("unknown backend kind '" + std::string(text) +
                    "' (expected external, oracle, linear_band, passthrough)");
}

namespace {

class PassthroughBackend final : public Backend {
 public:
  explicit PassthroughBackend(std::vector<std::string> stems) : stems_(std::move(stems)) {}

  StemSet infer(const Waveform& input, std::ptrdiff_t) const override {
    StemSet out;
    for (const auto& s : stems_) out.set(s, input);
    return out;
  }

 private:
  std::vector<std::string> stems_;
};

/// Telescoping split into N bands using centred moving averages whose radius
/// halves from band to band: stems sum to the input, and the map is linear
/// and odd.
class LinearBandBackend final : public Backend {
 public:
  LinearBandBackend(std::vector<std::string> stems, std::size_t radius)
      : stems_(std::move(stems)), radius_(radius) {}

  StemSet infer(const Waveform& input, std::ptrdiff_t) const override {
    const std::size_t bands = stems_.size();
    // smoothers[j] has radius radius_ * 2^(bands - 2 - j): widest first.
    std::vector<Waveform> smoothed;
    for (std::size_t j = 0; j + 1 < bands; ++j) {
      smoothed.push_back(moving_average(input, radius_ << (bands - 2 - j)));
    }
    StemSet out;
    out.set(stems_.front(), smoothed.front());
    for (std::size_t j = 1; j + 1 < bands; ++j) out.set(stems_[j], smoothed[j] - smoothed[j - 1]);
    out.set(stems_.back(), input - smoothed.back());
    return out;
  }

 private:
  static Waveform moving_average(const Waveform& x, std::size_t radius) {
    Waveform out(x.num_channels(), x.length(), x.sample_rate());
    const auto len = static_cast<std::ptrdiff_t>(x.length());
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const double scale = 1.0 / static_cast<double>(2 * r + 1);
    for (std::size_t c = 0; c < x.num_channels(); ++c) {
      auto src = x.channel(c);
      auto dst = out.channel(c);
      double acc = 0.0;
      for (std::ptrdiff_t i = 0; i <= std::min(r, len - 1); ++i) acc += src[i];
      for (std::ptrdiff_t n = 0; n < len; ++n) {
        dst[n] = acc * scale;
        if (n + r + 1 < len) acc += src[n + r + 1];
        if (n - r >= 0) acc -= src[n - r];
      }
    }
    return out;
  }

  std::vector<std::string> stems_;
  std::size_t radius_;
};

/// Returns ground truth plus seeded Gaussian noise scaled to a target SDR.
///
/// The oracle is polarity-aware: an input anti-correlated with the record
/// mixture yields negated truth, with noise drawn from a separate stream, so
/// 0.5 f(x) - 0.5 f(-x) averages two independent noise draws. Noise depends
/// only on absolute sample position, so chunked and shifted inference sees
/// one consistent signal. In complement mode the raw output is the input
/// minus the stem estimate, like an instrumental-prediction model.
class OracleBackend final : public Backend {
 public:
  OracleBackend(const SeparatorSpec& spec, std::shared_ptr<const GroundTruth> truth)
      : truth_(std::move(truth)),
        complement_(spec.output_mode == OutputMode::kComplement),
        snr_db_(spec.noise_snr_db) {
    for (const auto& stem : spec.produced_stems) {
      if (!truth_->stems.contains(stem)) {
        throw ConfigError("oracle '" + spec.name + "': ground truth has no stem '" + stem + "'");
      }
      const Waveform& ref = truth_->stems.at(stem);
      if (!ref.same_shape(truth_->mixture)) {
        throw ConfigError("oracle '" + spec.name + "': ground truth stem '" + stem +
                          "' disagrees with the mixture");
      }
      auto n = std::make_unique<StemNoise>(ref);
      for (int p = 0; p < 2; ++p) {
        for (std::size_t c = 0; c < ref.num_channels(); ++c) {
          // Chained so that no (seed, stem, channel, polarity) tuples share a key.
          const std::uint64_t key = splitmix64(splitmix64(splitmix64(spec.seed) ^ fnv1a64(stem)) + c * 2 + p);
          n->polarity[p].streams.emplace_back(key);
        }
      }
      stems_.emplace(stem, std::move(n));
    }
  }

  StemSet infer(const Waveform& input, std::ptrdiff_t origin) const override {
    const Waveform reference = truth_->mixture.slice(origin, input.length());
    if (input.num_channels() != reference.num_channels()) {
      throw BackendError("oracle: input channel count differs from the bound record");
    }
    double corr = 0.0;
    for (std::size_t c = 0; c < input.num_channels(); ++c) {
      auto a = input.channel(c);
      auto b = reference.channel(c);
      for (std::size_t n = 0; n < a.size(); ++n) corr += a[n] * b[n];
    }
    const int p = corr < 0.0 ? 1 : 0;
    const double sign = p == 1 ? -1.0 : 1.0;
    const auto full = static_cast<std::ptrdiff_t>(truth_->mixture.length());

    StemSet out;
    for (const auto& [stem, n] : stems_) {
      const NoiseStream& noise = n->prepared(p, snr_db_);
      Waveform est = n->truth.slice(origin, input.length());
      for (std::size_t c = 0; c < est.num_channels(); ++c) {
        auto dst = est.channel(c);
        for (double& x : dst) x = sign * x;
        if (noise.gain == 0.0) continue;
        const auto& cached = noise.cache[c];
        for (std::size_t i = 0; i < dst.size(); ++i) {
          const std::ptrdiff_t at = origin + static_cast<std::ptrdiff_t>(i);
          const double g = at >= 0 && at < full ? cached[at] : noise.streams[c].gaussian(at);
          dst[i] += noise.gain * g;
        }
      }
      out.set(stem, complement_ ? input - est : std::move(est));
    }
    return out;
  }

 private:
  struct NoiseStream {
    std::vector<CounterNoise> streams;
    std::vector<std::vector<double>> cache;
    double gain = 0.0;
  };

  /// Noise for one stem. Each polarity's stream over the record is generated
  /// once, on first use, and scaled so that truth + noise hits the target SDR.
  struct StemNoise {
    explicit StemNoise(const Waveform& t) : truth(t) {}

    const NoiseStream& prepared(int p, double snr_db) const {
      std::call_once(once[p], [&] {
        NoiseStream& s = polarity[p];
        const double signal = truth.energy();
        if ((std::isinf(snr_db) && snr_db > 0) || signal == 0.0) return;
        double energy = 0.0;
        for (const auto& stream : s.streams) {
          std::vector<double> buf(truth.length());
          for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = stream.gaussian(static_cast<std::int64_t>(i));
          energy += pairwise_sum_squares(buf);
          s.cache.push_back(std::move(buf));
        }
        if (energy > 0.0) s.gain = std::sqrt(signal / (std::pow(10.0, snr_db / 10.0) * energy));
      });
      return polarity[p];
    }

    Waveform truth;
    mutable NoiseStream polarity[2];
    mutable std::once_flag once[2];
  };

  std::shared_ptr<const GroundTruth> truth_;
  bool complement_;
  double snr_db_;
  std::map<std::string, std::unique_ptr<StemNoise>> stems_;
};

class ExternalBackend final : public Backend {
 public:
  explicit ExternalBackend(SeparatorSpec spec) : spec_(std::move(spec)) {}

  StemSet infer(const Waveform& input, std::ptrdiff_t) const override {
    detail::TempDir work("demix-backend-");
    const auto in_path = work.path() / "input.wav";
    const auto out_dir = work.path() / "out";
    std::filesystem::create_directory(out_dir);

    const bool upmix = spec_.channels == 2 && input.num_channels() == 1;
    if (spec_.channels != 0 && !upmix && spec_.channels != input.num_channels()) {
      throw BackendError("backend '" + spec_.name + "' expects " + std::to_string(spec_.channels) +
                         " channels, got " + std::to_string(input.num_channels()));
    }
    if (upmix) {
      std::vector<std::vector<double>> ch(2, std::vector<double>(input.channel(0).begin(), input.channel(0).end()));
      save_wav(Waveform(std::move(ch), input.sample_rate()), in_path);
    } else {
      save_wav(input, in_path);
    }

    std::vector<std::string> argv;
    for (std::string token : spec_.command) {
      replace_all(token, "{input}", in_path.string());
      replace_all(token, "{output_dir}", out_dir.string());
      argv.push_back(std::move(token));
    }

    const auto result = detail::run_process(argv, work.path() / "log.txt",
                                            std::chrono::duration<double>(spec_.timeout_seconds));
    if (result.timed_out) {
      throw BackendError("backend '" + spec_.name + "' timed out after " +
                             std::to_string(spec_.timeout_seconds) + " s",
                         result.output);
    }
    if (result.exit_code != 0) {
      throw BackendError("backend '" + spec_.name + "' exited with status " + std::to_string(result.exit_code),
                         result.output);
    }

    StemSet out;
    for (const auto& stem : spec_.produced_stems) {
      const auto path = out_dir / (stem + ".wav");
      if (!std::filesystem::exists(path)) {
        throw BackendError("backend '" + spec_.name + "' did not write " + stem + ".wav", result.output);
      }
      Waveform w;
      try {
        w = load_wav(path);
      } catch (const WavError& e) {
        throw BackendError("backend '" + spec_.name + "' wrote an unreadable " + stem + ".wav: " + e.what(),
                           result.output);
      }
      if (upmix && w.num_channels() == 2) w = downmix(w);
      if (!w.same_shape(input)) {
        throw BackendError("backend '" + spec_.name + "' wrote " + stem + ".wav with " +
                               std::to_string(w.num_channels()) + "ch x " + std::to_string(w.length()) + " @ " +
                               std::to_string(w.sample_rate()) + " Hz; expected " +
                               std::to_string(input.num_channels()) + "ch x " + std::to_string(input.length()) +
                               " @ " + std::to_string(input.sample_rate()) + " Hz",
                           result.output);
      }
      out.set(stem, std::move(w));
    }
    return out;
  }

 private:
  static void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
      s.replace(pos, from.size(), to);
    }
  }

  static Waveform downmix(const Waveform& stereo) {
    std::vector<double> mono(stereo.length());
    auto l = stereo.channel(0);
    auto r = stereo.channel(1);
    for (std::size_t n = 0; n < mono.size(); ++n) mono[n] = 0.5 * (l[n] + r[n]);
    return Waveform({std::move(mono)}, stereo.sample_rate());
  }

  SeparatorSpec spec_;
};

}  // namespace

void validate_spec(const SeparatorSpec& spec) {
  const std::string who = "backend '" + spec.name + "': ";
  if (spec.produced_stems.empty()) throw ConfigError(who + "declares no produced stems");
  for (std::size_t i = 0; i < spec.produced_stems.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.produced_stems.size(); ++j) {
      if (spec.produced_stems[i] == spec.produced_stems[j]) {
        throw ConfigError(who + "stem '" + spec.produced_stems[i] + "' listed twice");
      }
    }
  }
  switch (spec.kind) {
    case BackendKind::kExternal:
      if (spec.command.empty()) throw ConfigError(who + "external backend needs a command");
      if (!(spec.timeout_seconds > 0)) throw ConfigError(who + "timeout must be positive");
      if (spec.channels > 2) throw ConfigError(who + "channels must be 0, 1 or 2");
      break;
    case BackendKind::kOracle:
      if (std::isnan(spec.noise_snr_db) || spec.noise_snr_db == -std::numeric_limits<double>::infinity()) {
        throw ConfigError(who + "noise_snr_db must be a number or +inf");
      }
      break;
    case BackendKind::kLinearBand:
      if (spec.produced_stems.size() < 2) throw ConfigError(who + "linear_band needs at least two stems");
      if (spec.band_radius == 0) throw ConfigError(who + "band_radius must be positive");
      if (spec.produced_stems.size() > 16) throw ConfigError(who + "linear_band supports at most 16 stems");
      break;
    case BackendKind::kPassthrough:
      break;
  }
}

Separator::Separator(SeparatorSpec spec, std::shared_ptr<const Backend> backend)
    : spec_(std::move(spec)), backend_(std::move(backend)) {
  if (!backend_) throw ConfigError("separator '" + spec_.name + "' has no backend");
}

StemSet Separator::separate(const Waveform& input, std::ptrdiff_t origin) const {
  StemSet raw = backend_->infer(input, origin);
  if (spec_.verify_determinism) {
    if (!(backend_->infer(input, origin) == raw)) {
      throw BackendError("backend '" + spec_.name + "' is nondeterministic: two runs on the same input differ");
    }
  }
  StemSet out;
  for (const auto& stem : spec_.produced_stems) {
    if (!raw.contains(stem)) throw BackendError("backend '" + spec_.name + "' produced no '" + stem + "' stem");
    const Waveform& w = raw.at(stem);
    if (!w.same_shape(input)) {
      throw BackendError("backend '" + spec_.name + "' returned a '" + stem + "' stem of the wrong shape");
    }
    w.check_finite();
    out.set(stem, spec_.output_mode == OutputMode::kComplement ? complement_output(input, w) : w);
  }
  return out;
}

Separator make_separator(const SeparatorSpec& spec, std::shared_ptr<const GroundTruth> truth) {
  validate_spec(spec);
  switch (spec.kind) {
    case BackendKind::kPassthrough:
      return Separator(spec, std::make_shared<PassthroughBackend>(spec.produced_stems));
    case BackendKind::kLinearBand:
      return Separator(spec, std::make_shared<LinearBandBackend>(spec.produced_stems, spec.band_radius));
    case BackendKind::kExternal:
      return Separator(spec, std::make_shared<ExternalBackend>(spec));
    case BackendKind::kOracle: {
      if (!truth) {
        throw ConfigError("oracle backend '" + spec.name + "' needs a dataset record with ground truth");
      }
      return Separator(spec, std::make_shared<OracleBackend>(spec, std::move(truth)));
    }
  }
  throw ConfigError("unhandled backend kind");
}

StemSet separate(const SeparatorSpec& spec, const Waveform& mixture, std::shared_ptr<const GroundTruth> truth) {
  return make_separator(spec, std::move(truth)).separate(mixture);
}

Waveform complement_output(const Waveform& mixture, const Waveform& predicted) {
  require_same_shape(mixture, predicted, "complement_output");
  return mixture - predicted;
}

StemSet chunked_separate(const Separator& separator, const Waveform& mixture, const ChunkParams& params,
                         const ExecOptions& exec) {
  if (params.shifts == 0) throw ConfigError("shifts must be at least 1");
  const std::size_t len = mixture.length();
  const auto& stems = separator.spec().produced_stems;

  std::vector<StemSet> passes(params.shifts);
  for (std::size_t j = 0; j < params.shifts; ++j) {
    const std::size_t shift = params.shifts == 1 ? 0 : j * params.max_shift / params.shifts;
    const auto origin = -static_cast<std::ptrdiff_t>(shift);
    const Waveform padded = shift == 0 ? mixture : mixture.slice(origin, len + shift);
    const std::size_t chunk_len = params.chunk_len == 0 ? std::max<std::size_t>(padded.length(), 1) : params.chunk_len;

    StemSet aligned;
    if (padded.length() <= chunk_len) {
      StemSet whole = separator.separate(padded, origin);
      for (const auto& s : stems) {
        aligned.set(s, shift == 0 ? whole.at(s) : whole.at(s).slice(static_cast<std::ptrdiff_t>(shift), len));
      }
    } else {
      const ChunkPlan plan = plan_chunks(padded.length(), chunk_len, params.overlap);
      std::vector<StemSet> outputs(plan.offsets.size());
      parallel_for(plan.offsets.size(), exec.jobs, [&](std::size_t k) {
        const auto off = static_cast<std::ptrdiff_t>(plan.offsets[k]);
        outputs[k] = separator.separate(padded.slice(off, chunk_len), origin + off);
      });
      for (const auto& s : stems) {
        std::vector<ChunkPiece> pieces;
        pieces.reserve(outputs.size());
        for (std::size_t k = 0; k < outputs.size(); ++k) pieces.emplace_back(plan.offsets[k], outputs[k].at(s));
        Waveform merged = overlap_add(pieces, plan, padded.length());
        aligned.set(s, shift == 0 ? std::move(merged) : merged.slice(static_cast<std::ptrdiff_t>(shift), len));
      }
    }
    passes[j] = std::move(aligned);
  }

  if (passes.size() == 1) return std::move(passes.front());
  StemSet out;
  const double inv = 1.0 / static_cast<double>(passes.size());
  for (const auto& s : stems) {
    Waveform acc = passes.front().at(s);
    for (std::size_t j = 1; j < passes.size(); ++j) acc += passes[j].at(s);
    acc *= inv;
    out.set(s, std::move(acc));
  }
  return out;
}

StemSet tta_polarity_all(const Separator& separator, const Waveform& mixture, const ChunkParams& params,
                         const ExecOptions& exec) {
  const StemSet forward = chunked_separate(separator, mixture, params, exec);
  const StemSet inverted = chunked_separate(separator, polarity_invert(mixture), params, exec);
  StemSet out;
  for (const auto& [stem, a] : forward) {
    const Waveform& b = inverted.at(stem);
    Waveform w(a.num_channels(), a.length(), a.sample_rate());
    for (std::size_t c = 0; c < w.num_channels(); ++c) {
      auto x = a.channel(c);
      auto y = b.channel(c);
      auto dst = w.channel(c);
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = 0.5 * x[n] + 0.5 * (-y[n]);
    }
    out.set(stem, std::move(w));
  }
  return out;
}

Waveform tta_polarity(const Separator& separator, const Waveform& mixture, const std::string& stem,
                      const ChunkParams& params, const ExecOptions& exec) {
  const auto& produced = separator.spec().produced_stems;
  if (std::find(produced.begin(), produced.end(), stem) == produced.end()) {
    throw ConfigError("backend '" + separator.spec().name + "' does not produce '" + stem + "'");
  }
  return tta_polarity_all(separator, mixture, params, exec).at(stem);
}

Waveform average_checkpoints(std::span<const Separator> separators, const Waveform& mixture,
                             const std::string& stem, const ChunkParams& params, const ExecOptions& exec) {
  if (separators.empty()) throw ConfigError("average_checkpoints: no checkpoints");
  for (const auto& sep : separators) {
    const auto& produced = sep.spec().produced_stems;
    if (std::find(produced.begin(), produced.end(), stem) == produced.end()) {
      throw ConfigError("checkpoint '" + sep.spec().name + "' does not produce '" + stem + "'");
    }
  }
  std::vector<Waveform> outputs(separators.size());
  parallel_for(separators.size(), exec.jobs, [&](std::size_t i) {
    outputs[i] = chunked_separate(separators[i], mixture, params, exec).at(stem);
  });
  Waveform acc = outputs.front();
  for (std::size_t i = 1; i < outputs.size(); ++i) acc += outputs[i];
  acc *= 1.0 / static_cast<double>(outputs.size());
  return acc;
}

}  // namespace demix
