#include "demix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "demix/error.hpp"
#include "demix/noise.hpp"

namespace demix {

namespace fs = std::filesystem;

SourcePool load_source_pool(const std::string& stem, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("source pool is not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DatasetError("source pool has no .wav files: " + dir.string());
  SourcePool pool{stem, {}, {}};
  for (const auto& f : files) {
    try {
      pool.sources.push_back(load_wav(f));
    } catch (const WavError& e) {
      throw DatasetError(std::string("unreadable source: ") + e.what());
    }
    pool.labels.push_back(f.filename().string());
  }
  return pool;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double between(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

/// Mono texture for one source.
std::vector<double> render(const std::string& stem, std::size_t len, unsigned rate, std::mt19937_64& rng) {
  std::vector<double> x(len, 0.0);
  const CounterNoise noise(rng());
  const double dt = 1.0 / rate;
  if (stem == "vocals" || stem == "dialog") {
    const double f0 = between(rng, 150.0, 400.0);
    const double syll = between(rng, 2.0, 4.0);
    double phase = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double t = n * dt;
      const double f = f0 * (1.0 + 0.01 * std::sin(kTwoPi * 5.0 * t));
      phase += kTwoPi * f * dt;
      double v = 0.0;
      for (int h = 1; h <= 5; ++h) v += std::sin(h * phase) / h;
      const double env = 0.5 + 0.5 * std::sin(kTwoPi * syll * t);
      x[n] = env * env * v + 0.02 * noise.gaussian(static_cast<std::int64_t>(n));
    }
  } else if (stem == "bass") {
    double notes[4];
    for (double& f : notes) f = between(rng, 40.0, 100.0);
    double phase = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double t = n * dt;
      phase += kTwoPi * notes[static_cast<std::size_t>(t * 2.0) % 4] * dt;
      x[n] = std::sin(phase) + 0.3 * std::sin(2.0 * phase);
    }
  } else if (stem == "drums") {
    const double bpm = between(rng, 80.0, 160.0);
    const double beat = 60.0 / bpm;
    for (std::size_t n = 0; n < len; ++n) {
      const double t = n * dt;
      const double tb = std::fmod(t, beat);
      const double th = std::fmod(t, beat / 2.0);
      const double kick = std::exp(-tb * 30.0) * std::sin(kTwoPi * 60.0 * tb);
      const double hat = 0.3 * std::exp(-th * 80.0) * noise.gaussian(static_cast<std::int64_t>(n));
      x[n] = kick + hat;
    }
  } else if (stem == "other") {
    double freqs[3];
    for (double& f : freqs) f = between(rng, 200.0, 1000.0);
    for (std::size_t n = 0; n < len; ++n) {
      const double t = n * dt;
      double v = 0.0;
      for (double f : freqs) v += std::sin(kTwoPi * f * t);
      x[n] = v / 3.0 + 0.05 * noise.gaussian(static_cast<std::int64_t>(n));
    }
  } else if (stem == "instrumental" || stem == "music") {
    for (const char* part : {"bass", "drums", "other"}) {
      const auto p = render(part, len, rate, rng);
      for (std::size_t n = 0; n < len; ++n) x[n] += p[n];
    }
  } else {
    const double f = between(rng, 100.0, 2000.0);
    for (std::size_t n = 0; n < len; ++n) {
      x[n] = std::sin(kTwoPi * f * n * dt) + 0.1 * noise.gaussian(static_cast<std::int64_t>(n));
    }
  }
  return x;
}

Waveform peak_normalized(Waveform w, double peak) {
  const double p = w.peak();
  if (p > 0.0) w *= peak / p;
  return w;
}

Waveform upmix(const Waveform& w, std::size_t channels, const std::string& label) {
  if (w.num_channels() == channels) return w;
  if (w.num_channels() == 1) {
    std::vector<std::vector<double>> ch(channels, std::vector<double>(w.channel(0).begin(), w.channel(0).end()));
    return Waveform(std::move(ch), w.sample_rate());
  }
  throw DatasetError(fmt::format("source '{}' has {} channels, cannot fit {}", label, w.num_channels(), channels));
}

}  // namespace

SourcePool procedural_pool(const std::string& stem, std::size_t count, double duration_s, unsigned sample_rate,
                           std::size_t channels, std::uint64_t seed) {
  if (count == 0) throw DatasetError("procedural pool needs at least one source");
  if (!(duration_s > 0.0)) throw DatasetError("procedural source duration must be positive");
  if (channels == 0) throw DatasetError("procedural pool needs at least one channel");
  std::mt19937_64 rng(seed ^ fnv1a64(stem));
  const auto len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  SourcePool pool{stem, {}, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const auto mono = render(stem, len, sample_rate, rng);
    std::vector<std::vector<double>> ch;
    for (std::size_t c = 0; c < channels; ++c) {
      const double gain = channels == 1 ? 1.0 : between(rng, 0.6, 1.0);
      std::vector<double> v(mono);
      for (double& s : v) s *= gain;
      ch.push_back(std::move(v));
    }
    pool.sources.emplace_back(std::move(ch), sample_rate);
    pool.labels.push_back(fmt::format("{}-{:03d}", stem, i));
  }
  return pool;
}

Waveform fit_length(const Waveform& source, std::size_t length, std::size_t offset, std::size_t crossfade) {
  const std::size_t src_len = source.length();
  if (src_len == 0) throw DatasetError("cannot fit an empty source");
  if (src_len >= length) return source.slice(static_cast<std::ptrdiff_t>(std::min(offset, src_len - length)), length);

  const std::size_t xf = std::min(crossfade, src_len / 2);
  Waveform out(source.num_channels(), length, source.sample_rate());
  for (std::size_t c = 0; c < source.num_channels(); ++c) {
    const auto src = source.channel(c);
    auto dst = out.channel(c);
    std::copy(src.begin(), src.end(), dst.begin());
    std::size_t written = src_len;
    while (written < length) {
      const std::size_t start = written - xf;
      for (std::size_t k = 0; k < xf && start + k < length; ++k) {
        const double theta = 0.5 * std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(xf);
        dst[start + k] = dst[start + k] * std::cos(theta) + src[k] * std::sin(theta);
      }
      for (std::size_t k = xf; k < src_len && start + k < length; ++k) dst[start + k] = src[k];
      written = start + src_len;
    }
  }
  return out;
}

std::vector<DatasetRecord> make_synthetic_dataset(const std::vector<SourcePool>& pools, const SynthOptions& options,
                                                  const fs::path& out_dir) {
  if (pools.empty()) throw DatasetError("no source pools");
  if (options.n_tracks == 0) throw DatasetError("n_tracks must be positive");
  if (!(options.duration_s > 0.0)) throw DatasetError("duration must be positive");
  if (options.channels == 0 || options.channels > 2) throw DatasetError("channels must be 1 or 2");
  for (const auto& p : pools) {
    if (p.sources.empty()) throw DatasetError("source pool '" + p.stem + "' is empty");
    if (p.stem.empty() || p.stem == "mixture") throw DatasetError("invalid stem name '" + p.stem + "'");
    for (std::size_t i = 0; i < p.sources.size(); ++i) {
      if (p.sources[i].sample_rate() != options.sample_rate) {
        throw DatasetError(fmt::format("source '{}' is {} Hz, dataset is {} Hz (no resampling)",
                                       i < p.labels.size() ? p.labels[i] : p.stem, p.sources[i].sample_rate(),
                                       options.sample_rate));
      }
    }
  }
  const auto length = static_cast<std::size_t>(std::llround(options.duration_s * options.sample_rate));
  const auto crossfade = static_cast<std::size_t>(std::llround(options.crossfade_s * options.sample_rate));
  const int width = std::max<int>(3, static_cast<int>(std::to_string(options.n_tracks - 1).size()));

  fs::create_directories(out_dir);
  std::mt19937_64 rng(options.seed);
  nlohmann::json manifest = {{"seed", options.seed},   {"duration_s", options.duration_s},
                             {"sample_rate", options.sample_rate}, {"channels", options.channels},
                             {"source_peak", options.source_peak}, {"mixture_peak", options.mixture_peak}};
  nlohmann::json tracks = nlohmann::json::array();
  std::vector<DatasetRecord> records;

  for (std::size_t t = 0; t < options.n_tracks; ++t) {
    const std::string id = fmt::format("{}{:0{}d}", options.id_prefix, t, width);
    const fs::path dir = out_dir / id;
    if (fs::exists(dir)) throw DatasetError("refusing to overwrite existing track folder " + dir.string());

    std::vector<Waveform> stems;
    nlohmann::json picks = nlohmann::json::object();
    for (const auto& pool : pools) {
      const std::size_t idx = rng() % pool.sources.size();
      const Waveform& src = pool.sources[idx];
      const std::uint64_t draw = rng();
      const std::size_t offset = src.length() > length ? draw % (src.length() - length + 1) : 0;
      const std::string label = idx < pool.labels.size() ? pool.labels[idx] : std::to_string(idx);
      Waveform w = upmix(fit_length(src, length, offset, crossfade), options.channels, label);
      stems.push_back(peak_normalized(std::move(w), options.source_peak));
      picks[pool.stem] = {{"source", label}, {"offset", offset}};
    }

    Waveform mix(options.channels, length, options.sample_rate);
    for (const auto& s : stems) mix += s;
    const double peak = mix.peak();
    const double gain = peak > 0.0 ? options.mixture_peak / peak : 1.0;
    for (auto& s : stems) {
      s *= gain;
      s = quantize(s, options.encoding);
    }
    Waveform stored(options.channels, length, options.sample_rate);
    for (const auto& s : stems) stored += s;

    fs::create_directories(dir);
    DatasetRecord rec;
    rec.id = id;
    rec.dir = dir;
    rec.mixture_path = dir / kMixtureFile;
    save_wav(stored, rec.mixture_path, options.encoding);
    for (std::size_t i = 0; i < pools.size(); ++i) {
      const fs::path p = dir / (pools[i].stem + ".wav");
      save_wav(stems[i], p, options.encoding);
      rec.stem_paths[pools[i].stem] = p;
    }
    rec.sample_rate = options.sample_rate;
    rec.length = length;
    rec.channels = options.channels;
    rec.duration_s = static_cast<double>(length) / options.sample_rate;
    records.push_back(std::move(rec));
    tracks.push_back({{"id", id}, {"gain", gain}, {"sources", picks}});
  }
  manifest["tracks"] = std::move(tracks);
  std::ofstream out(out_dir / "sources.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw DatasetError("cannot write " + (out_dir / "sources.json").string());
  return records;
}

std::vector<DatasetRecord> make_synthetic_dataset(const fs::path& vocal_pool, const fs::path& instr_pool,
                                                  const SynthOptions& options, const fs::path& out_dir) {
  return make_synthetic_dataset({load_source_pool("vocals", vocal_pool), load_source_pool("instrumental", instr_pool)},
                                options, out_dir);
}

}  // namespace demix
