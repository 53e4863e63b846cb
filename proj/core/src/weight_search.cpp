#include "demix/weight_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "demix/error.hpp"
#include "demix/metrics.hpp"
#include "demix/wav_io.hpp"

namespace demix {

namespace fs = std::filesystem;
using nlohmann::json;

void WeightSearchProblem::validate() const {
  if (backend_names.empty()) throw ConfigError("weight search: no backends");
  if (records.empty()) throw ConfigError("weight search: no records");
  for (const auto& r : records) {
    if (r.estimates.size() != backend_names.size()) {
      throw ConfigError(fmt::format("weight search: record '{}' has {} estimates for {} backends", r.id,
                                    r.estimates.size(), backend_names.size()));
    }
    for (const auto& e : r.estimates) require_same_shape(r.reference, e, "weight search");
  }
}

double score_weights(const WeightSearchProblem& problem, const WeightVector& w) {
  if (w.size() != problem.dimensions()) {
    throw ConfigError(fmt::format("weight search: {} weights for {} backends", w.size(), problem.dimensions()));
  }
  if (problem.records.empty()) throw ConfigError("weight search: no records");
  std::vector<double> scores;
  scores.reserve(problem.records.size());
  for (const auto& r : problem.records) {
    scores.push_back(sdr(r.reference, blend_weighted(r.estimates, w), problem.epsilon));
  }
  return pairwise_sum(scores) / static_cast<double>(scores.size());
}

namespace {

bool ranks_before(const ScoredWeights& a, const ScoredWeights& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.weights < b.weights;
}

}  // namespace

std::vector<std::vector<double>> integer_grid(std::size_t dims, int lo, int hi) {
  if (lo > hi) throw ConfigError("integer grid: lo > hi");
  std::vector<double> axis;
  for (int v = lo; v <= hi; ++v) axis.push_back(v);
  return std::vector<std::vector<double>>(dims, axis);
}

GridResult grid_search(const WeightSearchProblem& problem, const std::vector<std::vector<double>>& grid,
                       const ExecOptions& exec) {
  problem.validate();
  if (grid.size() != problem.dimensions()) {
    throw ConfigError(fmt::format("grid has {} axes for {} backends", grid.size(), problem.dimensions()));
  }
  std::vector<std::vector<double>> axes;
  for (const auto& axis : grid) {
    if (axis.empty()) throw ConfigError("grid axis is empty");
    std::set<double> values(axis.begin(), axis.end());
    for (double v : values) {
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("grid values must be finite and non-negative");
    }
    axes.emplace_back(values.begin(), values.end());
  }

  // Odometer over the sorted axes visits points in lexicographic order, so
  // the first point seen for a normalized direction is its smallest one.
  std::vector<WeightVector> points;
  std::set<std::vector<double>> seen;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    std::vector<double> w(axes.size());
    double total = 0.0;
    for (std::size_t d = 0; d < axes.size(); ++d) {
      w[d] = axes[d][idx[d]];
      total += w[d];
    }
    if (total > 0.0) {
      WeightVector wv(w);
      if (seen.insert(wv.normalized()).second) points.push_back(std::move(wv));
    }
    std::size_t d = axes.size();
    while (d > 0 && ++idx[d - 1] == axes[d - 1].size()) idx[--d] = 0;
    if (d == 0) break;
  }
  if (points.empty()) throw ConfigError("grid contains only all-zero weight vectors");

  std::vector<double> scores(points.size());
  parallel_for(points.size(), exec.jobs, [&](std::size_t i) { scores[i] = score_weights(problem, points[i]); });

  GridResult result;
  result.table.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) result.table.push_back({points[i], scores[i]});
  std::stable_sort(result.table.begin(), result.table.end(), ranks_before);
  result.best = result.table.front();
  return result;
}

ScoredWeights coordinate_ascent(const WeightSearchProblem& problem, const WeightVector& init,
                                const std::vector<double>& steps, std::size_t max_rounds) {
  problem.validate();
  for (double s : steps) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("coordinate ascent steps must be positive");
  }
  ScoredWeights best{init, score_weights(problem, init)};
  for (double step : steps) {
    for (std::size_t round = 0; round < max_rounds; ++round) {
      bool improved = false;
      for (std::size_t i = 0; i < best.weights.size(); ++i) {
        for (double delta : {step, -step}) {
          std::vector<double> w(best.weights.values().begin(), best.weights.values().end());
          w[i] += delta;
          if (w[i] < 0.0) continue;
          double total = 0.0;
          for (double v : w) total += v;
          if (!(total > 0.0)) continue;
          WeightVector candidate(std::move(w));
          const double s = score_weights(problem, candidate);
          if (s > best.score) {
            best = {std::move(candidate), s};
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
  }
  return best;
}

void save_problem_cache(const WeightSearchProblem& problem, const fs::path& dir) {
  problem.validate();
  fs::create_directories(dir);
  json index{{"stem", problem.stem}, {"epsilon", problem.epsilon}, {"backends", problem.backend_names}};
  json records = json::array();
  for (const auto& r : problem.records) {
    const fs::path rdir = dir / r.id;
    fs::create_directories(rdir);
    save_wav(r.reference, rdir / "reference.wav");
    json files = json::array();
    for (std::size_t b = 0; b < r.estimates.size(); ++b) {
      const std::string name = fmt::format("{:02d}_{}.wav", b, problem.backend_names[b]);
      save_wav(r.estimates[b], rdir / name);
      files.push_back(r.id + "/" + name);
    }
    records.push_back({{"id", r.id}, {"reference", r.id + "/reference.wav"}, {"estimates", files}});
  }
  index["records"] = std::move(records);
  std::ofstream out(dir / "index.json");
  out << index.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (dir / "index.json").string());
}

WeightSearchProblem load_problem_cache(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw ConfigError("no weight cache index at " + (dir / "index.json").string());
  WeightSearchProblem p;
  try {
    const json index = json::parse(in);
    p.stem = index.at("stem").get<std::string>();
    p.epsilon = index.at("epsilon").get<double>();
    p.backend_names = index.at("backends").get<std::vector<std::string>>();
    for (const auto& r : index.at("records")) {
      CandidateRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.reference = load_wav(dir / r.at("reference").get<std::string>());
      for (const auto& f : r.at("estimates")) rec.estimates.push_back(load_wav(dir / f.get<std::string>()));
      p.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed weight cache index: " + std::string(e.what()));
  }
  p.validate();
  return p;
}

std::map<std::string, WeightSearchProblem> build_problems(const PipelineConfig& cfg,
                                                          const std::vector<TruthRecord>& records, double epsilon,
                                                          const ExecOptions& exec) {
  cfg.validate();
  if (cfg.kind == PipelineKind::kSingle) throw ConfigError("single-backend pipelines have no weights to search");
  if (records.empty()) throw ConfigError("weight search: no records");

  std::map<std::string, WeightSearchProblem> out;
  auto init = [&](const std::string& stem, const std::vector<StageMember>& members) {
    auto& p = out[stem];
    p.stem = stem;
    p.epsilon = epsilon;
    for (const auto& m : members) p.backend_names.push_back(m.spec.name);
  };
  init(cfg.vocal_stem, cfg.vocal_members);
  if (cfg.kind == PipelineKind::kMdx) {
    for (const auto& stem : kInstrumentStems) init(stem, cfg.instrument_members);
  }

  for (const auto& rec : records) {
    if (!rec.truth) throw ConfigError("weight search: record '" + rec.id + "' has no ground truth");
    const RunContext ctx{rec.truth, exec};
    auto vs = vocal_stage(cfg, rec.truth->mixture, ctx);
    out[cfg.vocal_stem].records.push_back({rec.id, rec.truth->stems.at(cfg.vocal_stem), std::move(vs.member_estimates)});
    if (cfg.kind != PipelineKind::kMdx) continue;
    const auto outputs = instrument_member_outputs(cfg, vs.instr, ctx);
    for (const auto& stem : kInstrumentStems) {
      CandidateRecord c{rec.id, rec.truth->stems.at(stem), {}};
      for (const auto& o : outputs) c.estimates.push_back(o.at(stem));
      out[stem].records.push_back(std::move(c));
    }
  }
  return out;
}

std::string format_ranked_table(const WeightSearchProblem& problem, const std::vector<ScoredWeights>& rows,
                                std::size_t limit) {
  std::string out = fmt::format("{:>4}  {:>9}  weights ({})\n", "rank", "SDR [dB]", fmt::join(problem.backend_names, ", "));
  for (std::size_t i = 0; i < rows.size() && i < limit; ++i) {
    out += fmt::format("{:>4}  {:>9.3f}  {}\n", i + 1, rows[i].score, to_string(rows[i].weights));
  }
  return out;
}

}  // namespace demix
