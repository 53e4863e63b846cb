#include "demix/metrics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "demix/error.hpp"

namespace demix {

namespace {

double error_energy(const Waveform& ref, const Waveform& est) {
  double total = 0.0;
  std::vector<double> diff(ref.length());
  for (std::size_t c = 0; c < ref.num_channels(); ++c) {
    auto s = ref.channel(c);
    auto e = est.channel(c);
    for (std::size_t n = 0; n < diff.size(); ++n) diff[n] = s[n] - e[n];
    total += pairwise_sum_squares(diff);
  }
  return total;
}

double mean_of(const std::map<std::string, double>& values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& [k, x] : values) v.push_back(x);
  return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

double sdr(const Waveform& reference, const Waveform& estimate, const SdrOptions& options) {
  if (!(options.epsilon >= 0.0)) throw MetricError("epsilon must be non-negative");
  double signal = 0.0;
  double error = 0.0;
  if (reference.same_shape(estimate)) {
    signal = reference.energy();
    error = error_energy(reference, estimate);
  } else if (options.pad_mismatched_lengths && reference.num_channels() == estimate.num_channels() &&
             reference.sample_rate() == estimate.sample_rate()) {
    const std::size_t len = std::max(reference.length(), estimate.length());
    const Waveform ref = reference.slice(0, len);
    const Waveform est = estimate.slice(0, len);
    signal = ref.energy();
    error = error_energy(ref, est);
  } else {
    require_same_shape(reference, estimate, "sdr");
  }

  const double num = signal + options.epsilon;
  const double den = error + options.epsilon;
  if (den == 0.0) {
    if (options.strict) throw MetricError("infinite SDR: zero error energy with epsilon = 0");
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  if (num == 0.0) {
    if (options.strict) throw MetricError("SDR of a silent reference is -infinity with epsilon = 0");
    return -std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(num / den);
}

double sdr(const Waveform& reference, const Waveform& estimate, double epsilon) {
  SdrOptions options;
  options.epsilon = epsilon;
  return sdr(reference, estimate, options);
}

RecordScore sdr_record(const StemSet& references, const StemSet& estimates, const SdrOptions& options) {
  if (references.empty()) throw MetricError("record has no reference stems");
  RecordScore score;
  for (const auto& [name, ref] : references) {
    if (!estimates.contains(name)) throw MetricError("missing estimate for stem '" + name + "'");
    const Waveform& est = estimates.at(name);
    if (!ref.same_shape(est) && options.pad_mismatched_lengths) {
      score.warnings.push_back("stem '" + name + "' zero-padded to a common length");
    }
    score.stems[name] = sdr(ref, est, options);
  }
  for (const auto& [name, est] : estimates) {
    if (!references.contains(name)) {
      score.warnings.push_back("ignored extra estimate stem '" + name + "'");
    }
  }
  score.mean = mean_of(score.stems);
  return score;
}

double SdrReport::column_mean() const {
  if (per_stem.empty()) return 0.0;
  return mean_of(per_stem);
}

SdrReport aggregate_scores(std::map<std::string, RecordScore> per_record, double epsilon) {
  if (per_record.empty()) throw MetricError("cannot aggregate an empty record list");
  SdrReport report;
  report.epsilon = epsilon;
  report.n_records = per_record.size();

  std::vector<double> means;
  std::map<std::string, std::vector<double>> columns;
  std::vector<double> instrumental;
  for (const auto& [id, rec] : per_record) {
    means.push_back(rec.mean);
    for (const auto& [stem, value] : rec.stems) columns[stem].push_back(value);
    if (rec.instrumental) instrumental.push_back(*rec.instrumental);
    for (const auto& w : rec.warnings) report.notes.push_back(id + ": " + w);
  }
  report.total = pairwise_sum(means) / static_cast<double>(means.size());
  for (const auto& [stem, values] : columns) {
    report.per_stem[stem] = pairwise_sum(values) / static_cast<double>(values.size());
  }
  if (!instrumental.empty()) {
    report.instrumental = pairwise_sum(instrumental) / static_cast<double>(instrumental.size());
  }
  report.per_record = std::move(per_record);
  return report;
}

SdrReport sdr_dataset(const std::vector<ScoredRecord>& records, const SdrOptions& options) {
  if (records.empty()) throw MetricError("cannot score an empty dataset");
  std::map<std::string, RecordScore> per_record;
  for (const auto& rec : records) {
    auto [it, inserted] = per_record.emplace(rec.id, sdr_record(rec.references, rec.estimates, options));
    if (!inserted) throw MetricError("duplicate record id '" + rec.id + "'");
  }
  return aggregate_scores(std::move(per_record), options.epsilon);
}

Waveform instrumental_reference(const Waveform& mixture, const Waveform& vocals_ref) {
  require_same_shape(mixture, vocals_ref, "instrumental_reference");
  return mixture - vocals_ref;
}

std::string format_report_table(const SdrReport& report) {
  std::vector<std::string> stems;
  for (const auto& [stem, v] : report.per_stem) stems.push_back(stem);
  const bool has_instr = report.instrumental.has_value();

  std::string out = fmt::format("{:<24}", "record");
  for (const auto& s : stems) out += fmt::format(" {:>10}", s);
  if (has_instr) out += fmt::format(" {:>10}", "instrum");
  out += fmt::format(" {:>10}\n", "mean");

  auto cell = [](const std::map<std::string, double>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? fmt::format(" {:>10}", "-") : fmt::format(" {:>10.2f}", it->second);
  };
  for (const auto& [id, rec] : report.per_record) {
    out += fmt::format("{:<24}", id);
    for (const auto& s : stems) out += cell(rec.stems, s);
    if (has_instr) {
      out += rec.instrumental ? fmt::format(" {:>10.2f}", *rec.instrumental) : fmt::format(" {:>10}", "-");
    }
    out += fmt::format(" {:>10.2f}\n", rec.mean);
  }
  out += fmt::format("{:<24}", fmt::format("mean ({} records)", report.n_records));
  for (const auto& s : stems) out += fmt::format(" {:>10.2f}", report.per_stem.at(s));
  if (has_instr) out += fmt::format(" {:>10.2f}", *report.instrumental);
  out += fmt::format(" {:>10.2f}\n", report.total);
  return out;
}

nlohmann::json report_to_json(const SdrReport& report) {
  using nlohmann::json;
  json doc;
  doc["total"] = report.total;
  doc["column_mean"] = report.column_mean();
  doc["epsilon"] = report.epsilon;
  doc["n_records"] = report.n_records;
  doc["per_stem"] = report.per_stem;
  doc["instrumental"] = report.instrumental ? json(*report.instrumental) : json(nullptr);
  doc["notes"] = report.notes;
  json records = json::object();
  for (const auto& [id, rec] : report.per_record) {
    json r;
    r["stems"] = rec.stems;
    r["mean"] = rec.mean;
    r["instrumental"] = rec.instrumental ? json(*rec.instrumental) : json(nullptr);
    r["warnings"] = rec.warnings;
    records[id] = std::move(r);
  }
  doc["per_record"] = std::move(records);
  return doc;
}

SdrReport report_from_json(const nlohmann::json& doc) {
  try {
    SdrReport report;
    report.total = doc.at("total").get<double>();
    report.epsilon = doc.value("epsilon", kDefaultSdrEpsilon);
    report.n_records = doc.value("n_records", std::size_t{0});
    report.per_stem = doc.at("per_stem").get<std::map<std::string, double>>();
    if (doc.contains("instrumental") && !doc["instrumental"].is_null()) {
      report.instrumental = doc["instrumental"].get<double>();
    }
    report.notes = doc.value("notes", std::vector<std::string>{});
    if (doc.contains("per_record")) {
      for (const auto& [id, r] : doc["per_record"].items()) {
        RecordScore rec;
        rec.stems = r.at("stems").get<std::map<std::string, double>>();
        rec.mean = r.at("mean").get<double>();
        if (r.contains("instrumental") && !r["instrumental"].is_null()) {
          rec.instrumental = r["instrumental"].get<double>();
        }
        rec.warnings = r.value("warnings", std::vector<std::string>{});
        report.per_record.emplace(id, std::move(rec));
      }
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw MetricError(std::string("malformed report document: ") + e.what());
  }
}

}  // namespace demix
