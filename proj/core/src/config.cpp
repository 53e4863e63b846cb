#include "demix/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "demix/error.hpp"
#include "demix/noise.hpp"
#include "presets.hpp"

namespace demix {

using nlohmann::json;

namespace {

std::string output_mode_name(OutputMode m) { return m == OutputMode::kDirect ? "direct" : "complement"; }

OutputMode parse_output_mode(const std::string& s) {
  if (s == "direct") return OutputMode::kDirect;
  if (s == "complement") return OutputMode::kComplement;
  throw ConfigError("output_mode must be 'direct' or 'complement', got '" + s + "'");
}

std::string polarity_name(Polarity p) {
  switch (p) {
    case Polarity::kNormal: return "normal";
    case Polarity::kInverted: return "inverted";
    case Polarity::kBoth: return "both";
  }
  return "normal";
}

Polarity parse_polarity(const std::string& s) {
  if (s == "normal") return Polarity::kNormal;
  if (s == "inverted") return Polarity::kInverted;
  if (s == "both") return Polarity::kBoth;
  throw ConfigError("polarity must be 'normal', 'inverted' or 'both', got '" + s + "'");
}

double parse_snr(const json& v) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("noise_snr_db must be a number or \"inf\"");
  }
  return v.get<double>();
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

ChunkSettings chunk_from_json(const json& doc) {
  ChunkSettings c;
  c.chunk_seconds = get_or(doc, "seconds", c.chunk_seconds);
  c.overlap = get_or(doc, "overlap", c.overlap);
  c.shifts = get_or(doc, "shifts", c.shifts);
  c.max_shift_seconds = get_or(doc, "max_shift_seconds", c.max_shift_seconds);
  return c;
}

json chunk_to_json(const ChunkSettings& c) {
  return json{{"seconds", c.chunk_seconds},
              {"overlap", c.overlap},
              {"shifts", c.shifts},
              {"max_shift_seconds", c.max_shift_seconds}};
}

StageMember member_from_json(const json& doc, Polarity default_polarity) {
  StageMember m;
  m.spec = spec_from_json(doc);
  if (doc.contains("chunk")) m.chunking = chunk_from_json(doc.at("chunk"));
  m.polarity = doc.contains("polarity") ? parse_polarity(doc.at("polarity").get<std::string>()) : default_polarity;
  return m;
}

json member_to_json(const StageMember& m) {
  json doc = spec_to_json(m.spec);
  doc["chunk"] = chunk_to_json(m.chunking);
  doc["polarity"] = polarity_name(m.polarity);
  return doc;
}

std::vector<StageMember> members_from_json(const json& stage, Polarity default_polarity) {
  std::vector<StageMember> out;
  for (const auto& b : stage.at("backends")) out.push_back(member_from_json(b, default_polarity));
  return out;
}

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> table = {
      {"mdx23", std::string(detail::kPresetMdx23)},
      {"cdx23", std::string(detail::kPresetCdx23)},
      {"test-oracle", std::string(detail::kPresetTestOracle)},
      {"passthrough", std::string(detail::kPresetPassthrough)},
  };
  return table;
}

json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
}

}  // namespace

SeparatorSpec spec_from_json(const json& doc) {
  try {
    SeparatorSpec s;
    s.name = doc.at("name").get<std::string>();
    s.kind = parse_backend_kind(doc.at("kind").get<std::string>());
    s.output_mode = parse_output_mode(get_or<std::string>(doc, "output_mode", "direct"));
    s.produced_stems = doc.at("stems").get<std::vector<std::string>>();
    if (doc.contains("checkpoint") && !doc.at("checkpoint").is_null()) {
      s.checkpoint_tag = doc.at("checkpoint").get<std::string>();
    }
    s.command = get_or(doc, "command", s.command);
    s.timeout_seconds = get_or(doc, "timeout_seconds", s.timeout_seconds);
    s.channels = get_or(doc, "channels", s.channels);
    if (doc.contains("noise_snr_db")) s.noise_snr_db = parse_snr(doc.at("noise_snr_db"));
    s.seed = get_or(doc, "seed", s.seed);
    s.band_radius = get_or(doc, "band_radius", s.band_radius);
    s.verify_determinism = get_or(doc, "verify_determinism", s.verify_determinism);
    validate_spec(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("backend entry: ") + e.what());
  }
}

json spec_to_json(const SeparatorSpec& s) {
  json doc{{"name", s.name},
           {"kind", to_string(s.kind)},
           {"output_mode", output_mode_name(s.output_mode)},
           {"stems", s.produced_stems}};
  if (s.checkpoint_tag) doc["checkpoint"] = *s.checkpoint_tag;
  switch (s.kind) {
    case BackendKind::kExternal:
      doc["command"] = s.command;
      doc["timeout_seconds"] = s.timeout_seconds;
      doc["channels"] = s.channels;
      break;
    case BackendKind::kOracle:
      doc["noise_snr_db"] = std::isinf(s.noise_snr_db) ? json("inf") : json(s.noise_snr_db);
      doc["seed"] = s.seed;
      break;
    case BackendKind::kLinearBand:
      doc["band_radius"] = s.band_radius;
      break;
    case BackendKind::kPassthrough:
      break;
  }
  if (s.verify_determinism) doc["verify_determinism"] = true;
  return doc;
}

PipelineConfig config_from_json(const json& doc) {
  try {
    PipelineConfig cfg;
    cfg.name = get_or<std::string>(doc, "name", "unnamed");
    const auto kind = get_or<std::string>(doc, "pipeline", "mdx");
    if (kind == "single") {
      cfg.kind = PipelineKind::kSingle;
      cfg.vocal_members.push_back(member_from_json(doc.at("backend"), Polarity::kNormal));
      cfg.validate();
      return cfg;
    }
    if (kind == "mdx") {
      cfg.kind = PipelineKind::kMdx;
    } else if (kind == "cdx") {
      cfg.kind = PipelineKind::kCdx;
    } else {
      throw ConfigError("pipeline must be 'mdx', 'cdx' or 'single', got '" + kind + "'");
    }
    cfg.vocal_stem = get_or<std::string>(doc, "vocal_stem", cfg.kind == PipelineKind::kMdx ? "vocals" : "dialog");

    const json& vocals = doc.at("vocals");
    cfg.vocal_members = members_from_json(vocals, Polarity::kNormal);
    cfg.vocal_weights = vocals.contains("weights")
                            ? WeightVector(vocals.at("weights").get<std::vector<double>>())
                            : WeightVector(std::vector<double>(cfg.vocal_members.size(), 1.0));

    if (cfg.kind == PipelineKind::kMdx) {
      const json& inst = doc.at("instruments");
      cfg.instrument_members = members_from_json(inst, Polarity::kBoth);
      for (const auto& [stem, w] : inst.at("weights").items()) {
        cfg.instrument_weights.emplace(stem, WeightVector(w.get<std::vector<double>>()));
      }
    } else {
      const json& res = doc.at("residual");
      cfg.instrument_members = members_from_json(res, Polarity::kNormal);
      cfg.residual_stems = res.at("stems").get<std::vector<std::string>>();
    }
    if (doc.contains("reconstruction")) {
      const json& r = doc.at("reconstruction");
      cfg.reconstruct = get_or(r, "enabled", cfg.reconstruct);
      cfg.strict_conservation = get_or(r, "strict_conservation", cfg.strict_conservation);
    }
    if (doc.contains("stems")) {
      const auto declared = doc.at("stems").get<std::vector<std::string>>();
      if (declared != cfg.output_stems()) {
        throw ConfigError("declared stems do not match the pipeline's output stems");
      }
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
}

json config_to_json(const PipelineConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  if (cfg.kind == PipelineKind::kSingle) {
    doc["pipeline"] = "single";
    doc["backend"] = member_to_json(cfg.vocal_members.front());
    return doc;
  }
  doc["pipeline"] = cfg.kind == PipelineKind::kMdx ? "mdx" : "cdx";
  doc["stems"] = cfg.output_stems();
  doc["vocal_stem"] = cfg.vocal_stem;
  json vocals;
  vocals["weights"] = std::vector<double>(cfg.vocal_weights.values().begin(), cfg.vocal_weights.values().end());
  vocals["backends"] = json::array();
  for (const auto& m : cfg.vocal_members) vocals["backends"].push_back(member_to_json(m));
  doc["vocals"] = std::move(vocals);

  json second;
  second["backends"] = json::array();
  for (const auto& m : cfg.instrument_members) second["backends"].push_back(member_to_json(m));
  if (cfg.kind == PipelineKind::kMdx) {
    json weights = json::object();
    for (const auto& [stem, w] : cfg.instrument_weights) {
      weights[stem] = std::vector<double>(w.values().begin(), w.values().end());
    }
    second["weights"] = std::move(weights);
    doc["instruments"] = std::move(second);
  } else {
    second["stems"] = cfg.residual_stems;
    doc["residual"] = std::move(second);
  }
  doc["reconstruction"] = {{"enabled", cfg.reconstruct}, {"strict_conservation", cfg.strict_conservation}};
  return doc;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return config_from_json(parse_text(text, path.string()));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : presets()) out.push_back(name);
  return out;
}

const std::string& preset_text(const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

PipelineConfig resolve_config(const std::string& ref) {
  if (std::filesystem::is_regular_file(ref)) return load_config_file(ref);
  if (const char* dir = std::getenv(kConfigDirEnv); dir != nullptr && *dir != '\0') {
    for (const auto& candidate : {std::filesystem::path(dir) / ref, std::filesystem::path(dir) / (ref + ".json")}) {
      if (std::filesystem::is_regular_file(candidate)) return load_config_file(candidate);
    }
  }
  if (presets().contains(ref)) return config_from_json(parse_text(preset_text(ref), "preset " + ref));
  throw ConfigError("config '" + ref + "' not found (not a file, not in $" + kConfigDirEnv +
                    ", not a built-in preset)");
}

void reseed_oracles(PipelineConfig& cfg, std::uint64_t seed) {
  auto apply = [seed](std::vector<StageMember>& members) {
    for (auto& m : members) {
      if (m.spec.kind == BackendKind::kOracle) m.spec.seed = splitmix64(seed) ^ m.spec.seed;
    }
  };
  apply(cfg.vocal_members);
  apply(cfg.instrument_members);
}

}  // namespace demix
