#include "demix/dataset.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "demix/error.hpp"
#include "demix/wav_io.hpp"

namespace demix {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> wav_stems_in(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    const std::string stem = e.path().stem().string();
    if (e.path().filename() == kMixtureFile || e.path().filename() == kInstrumentalFile) continue;
    out.push_back(stem);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Fills `rec` or returns the reason it is unusable.
std::optional<std::string> inspect(DatasetRecord& rec, const std::vector<std::string>& stems) {
  rec.mixture_path = rec.dir / kMixtureFile;
  if (!fs::is_regular_file(rec.mixture_path)) return "missing mixture.wav";
  WavInfo mix;
  try {
    mix = probe_wav(rec.mixture_path);
  } catch (const WavError& e) {
    return std::string("unreadable mixture: ") + e.what();
  }
  for (const auto& stem : stems) {
    const fs::path p = rec.dir / (stem + ".wav");
    if (!fs::is_regular_file(p)) return "missing " + stem + ".wav";
    WavInfo info;
    try {
      info = probe_wav(p);
    } catch (const WavError& e) {
      return "unreadable " + stem + ".wav: " + e.what();
    }
    if (info.sample_rate != mix.sample_rate || info.num_channels != mix.num_channels || info.length != mix.length) {
      return fmt::format("{}.wav is {} ch / {} Hz / {} samples but mixture.wav is {} ch / {} Hz / {} samples", stem,
                         info.num_channels, info.sample_rate, info.length, mix.num_channels, mix.sample_rate,
                         mix.length);
    }
    rec.stem_paths[stem] = p;
  }
  rec.sample_rate = mix.sample_rate;
  rec.length = mix.length;
  rec.channels = mix.num_channels;
  rec.duration_s = static_cast<double>(mix.length) / mix.sample_rate;
  return std::nullopt;
}

}  // namespace

ScanResult scan_dataset(const fs::path& root, const ScanOptions& options) {
  if (!fs::is_directory(root)) throw DatasetError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  ScanResult result;
  result.stems = options.mixture_only ? std::vector<std::string>{} : options.stems;
  bool vocabulary_fixed = options.mixture_only || !options.stems.empty();
  for (const auto& dir : dirs) {
    DatasetRecord rec;
    rec.id = dir.filename().string();
    rec.dir = dir;
    if (!vocabulary_fixed && fs::is_regular_file(dir / kMixtureFile)) {
      result.stems = wav_stems_in(dir);
      if (result.stems.empty()) {
        if (options.strict) throw DatasetError("track '" + rec.id + "': no stem files next to mixture.wav");
        result.skipped.push_back({rec.id, "no stem files"});
        continue;
      }
      vocabulary_fixed = true;
    }
    if (auto reason = inspect(rec, result.stems)) {
      if (options.strict) throw DatasetError("track '" + rec.id + "': " + *reason);
      result.skipped.push_back({rec.id, *reason});
      continue;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

GroundTruth load_record(const DatasetRecord& record) {
  GroundTruth gt;
  gt.mixture = load_wav(record.mixture_path);
  for (const auto& [stem, path] : record.stem_paths) {
    Waveform w = load_wav(path);
    if (!w.same_shape(gt.mixture)) throw DatasetError("track '" + record.id + "': " + stem + ".wav changed shape");
    gt.stems.set(stem, std::move(w));
  }
  return gt;
}

SdrReport evaluate_submission(const std::vector<DatasetRecord>& records, const fs::path& predictions,
                              const EvaluateOptions& options) {
  if (records.empty()) throw DatasetError("no records to evaluate");
  if (!fs::is_directory(predictions)) throw DatasetError("predictions directory not found: " + predictions.string());

  std::vector<RecordScore> scores(records.size());
  parallel_for(records.size(), options.exec.jobs, [&](std::size_t i) {
    const DatasetRecord& rec = records[i];
    const GroundTruth gt = load_record(rec);
    const fs::path pdir = predictions / rec.id;
    const bool have_dir = fs::is_directory(pdir);
    if (!have_dir && options.missing == MissingPolicy::kError) {
      throw DatasetError("no prediction folder for track '" + rec.id + "'");
    }
    std::vector<std::string> notes;
    StemSet estimates;
    for (const auto& [stem, ref] : gt.stems) {
      const fs::path p = pdir / (stem + ".wav");
      if (have_dir && fs::is_regular_file(p)) {
        Waveform est = load_wav(p);
        if (est.sample_rate() != ref.sample_rate() || est.num_channels() != ref.num_channels()) {
          throw DatasetError(fmt::format("track '{}': {}.wav has {} ch / {} Hz, expected {} ch / {} Hz", rec.id, stem,
                                         est.num_channels(), est.sample_rate(), ref.num_channels(),
                                         ref.sample_rate()));
        }
        if (est.length() != ref.length()) {
          if (!options.sdr.pad_mismatched_lengths) {
            throw DatasetError(fmt::format("track '{}': {}.wav has {} samples, expected {}", rec.id, stem,
                                           est.length(), ref.length()));
          }
          notes.push_back(fmt::format("stem '{}' length {} padded or cut to {}", stem, est.length(), ref.length()));
          est = est.slice(0, ref.length());
        }
        estimates.set(stem, std::move(est));
      } else if (options.missing == MissingPolicy::kZeros) {
        notes.push_back("stem '" + stem + "' missing, scored against silence");
        estimates.set(stem, Waveform(ref.num_channels(), ref.length(), ref.sample_rate()));
      } else {
        throw DatasetError("track '" + rec.id + "': missing prediction " + stem + ".wav");
      }
    }
    RecordScore score = sdr_record(gt.stems, estimates, options.sdr);
    if (gt.stems.contains("vocals")) {
      const Waveform ref = instrumental_reference(gt.mixture, gt.stems.at("vocals"));
      const fs::path ip = pdir / kInstrumentalFile;
      Waveform est;
      if (have_dir && fs::is_regular_file(ip)) {
        est = load_wav(ip);
        if (est.sample_rate() != ref.sample_rate() || est.num_channels() != ref.num_channels() ||
            (est.length() != ref.length() && !options.sdr.pad_mismatched_lengths)) {
          throw DatasetError("track '" + rec.id + "': instrum.wav does not match the mixture's shape");
        }
        est = est.slice(0, ref.length());
      } else {
        est = gt.mixture - estimates.at("vocals");
      }
      score.instrumental = sdr(ref, est, options.sdr);
    }
    score.warnings.insert(score.warnings.end(), notes.begin(), notes.end());
    scores[i] = std::move(score);
  });

  std::map<std::string, RecordScore> per_record;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!per_record.emplace(records[i].id, std::move(scores[i])).second) {
      throw DatasetError("duplicate record id '" + records[i].id + "'");
    }
  }
  return aggregate_scores(std::move(per_record), options.sdr.epsilon);
}

}  // namespace demix
