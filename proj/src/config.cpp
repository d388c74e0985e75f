#include "mvsde/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "mvsde/error.hpp"

namespace mvsde {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Location {
  const std::string& source;
  std::size_t line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << source << ":" << line << ": key '" << key << "': " << msg;
    throw ConfigError(os.str());
  }
};

double to_double(const std::string& v, const Location& at) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end || v.empty()) at.fail("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const Location& at) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end || v.empty()) {
    at.fail("expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v, const Location& at) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  at.fail("expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

std::vector<double> to_doubles(const std::string& v, const Location& at) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(s, at));
  if (out.empty()) at.fail("expected a comma-separated list of numbers");
  return out;
}

template <typename T>
std::vector<T> to_uints(const std::string& v, const Location& at) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) out.push_back(static_cast<T>(to_u64(s, at)));
  if (out.empty()) at.fail("expected a comma-separated list of integers");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Location&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"experiment", [](auto& c, auto& v, auto&) { c.experiment = v; }},
      {"model.id", [](auto& c, auto& v, auto&) { c.model_id = v; }},
      {"sim.d", [](auto& c, auto& v, auto& at) { c.dimension = to_u64(v, at); }},
      {"sim.N", [](auto& c, auto& v, auto& at) { c.particles = to_u64(v, at); }},
      {"sim.T", [](auto& c, auto& v, auto& at) { c.horizon = to_double(v, at); }},
      {"sim.n", [](auto& c, auto& v, auto& at) { c.level = static_cast<unsigned>(to_u64(v, at)); }},
      {"sim.levels", [](auto& c, auto& v, auto& at) { c.levels = to_uints<unsigned>(v, at); }},
      {"sim.L", [](auto& c, auto& v, auto& at) { c.finest_level = static_cast<unsigned>(to_u64(v, at)); }},
      {"sim.seed", [](auto& c, auto& v, auto& at) { c.seed = to_u64(v, at); }},
      {"sim.streaming", [](auto& c, auto& v, auto& at) { c.streaming = to_bool(v, at); }},
      {"sim.memory_cap_mb", [](auto& c, auto& v, auto& at) { c.memory_cap_mb = to_u64(v, at); }},
      {"sim.blowup", [](auto& c, auto& v, auto& at) { c.blowup_threshold = to_double(v, at); }},
      {"init.law", [](auto& c, auto& v, auto&) { c.init_law = v; }},
      {"init.x0", [](auto& c, auto& v, auto& at) { c.init_x0 = to_doubles(v, at); }},
      {"init.mean", [](auto& c, auto& v, auto& at) { c.init_mean = to_doubles(v, at); }},
      {"init.cov", [](auto& c, auto& v, auto& at) { c.init_cov = to_doubles(v, at); }},
      {"init.lower", [](auto& c, auto& v, auto& at) { c.init_lower = to_doubles(v, at); }},
      {"init.upper", [](auto& c, auto& v, auto& at) { c.init_upper = to_doubles(v, at); }},
      {"record.level", [](auto& c, auto& v, auto& at) { c.record_level = static_cast<unsigned>(to_u64(v, at)); }},
      {"record.interpolate", [](auto& c, auto& v, auto& at) { c.record_interpolate = to_bool(v, at); }},
      {"analysis.p", [](auto& c, auto& v, auto& at) { c.p = to_double(v, at); }},
      {"analysis.lags", [](auto& c, auto& v, auto& at) { c.lags = to_uints<std::size_t>(v, at); }},
      {"metric.seed_b", [](auto& c, auto& v, auto& at) { c.metric_seed_b = to_u64(v, at); }},
      {"metric.perturb", [](auto& c, auto& v, auto& at) { c.metric_perturb = to_double(v, at); }},
      {"metric.coupling", [](auto& c, auto& v, auto&) { c.metric_coupling = v; }},
      {"rate.synthetic", [](auto& c, auto& v, auto& at) { c.rate_synthetic = to_bool(v, at); }},
      {"check.count", [](auto& c, auto& v, auto& at) { c.check_count = to_u64(v, at); }},
      {"gate.slope_min", [](auto& c, auto& v, auto& at) { c.gate_slope_min = to_double(v, at); }},
      {"gate.slope_max", [](auto& c, auto& v, auto& at) { c.gate_slope_max = to_double(v, at); }},
      {"gate.monotone", [](auto& c, auto& v, auto& at) { c.gate_monotone = to_bool(v, at); }},
      {"gate.exponent_min", [](auto& c, auto& v, auto& at) { c.gate_exponent_min = to_double(v, at); }},
      {"gate.exponent_max", [](auto& c, auto& v, auto& at) { c.gate_exponent_max = to_double(v, at); }},
      {"gate.moment_se", [](auto& c, auto& v, auto& at) { c.gate_moment_se = to_double(v, at); }},
      {"output.dir", [](auto& c, auto& v, auto&) { c.output_dir = v; }},
  };
  return kSetters;
}

std::vector<double> broadcast_vector(const std::vector<double>& v, std::size_t d, const char* name) {
  if (v.size() == d) return v;
  if (v.size() == 1) return std::vector<double>(d, v[0]);
  throw ConfigError(std::string(name) + " must have 1 or d = " + std::to_string(d) + " entries");
}

std::vector<double> broadcast_cov(const std::vector<double>& v, std::size_t d) {
  std::vector<double> c(d * d, 0.0);
  if (v.size() == d * d) return v;
  if (v.size() == 1 || v.size() == d) {
    for (std::size_t k = 0; k < d; ++k) c[k * d + k] = v.size() == 1 ? v[0] : v[k];
    return c;
  }
  throw ConfigError("init.cov must have 1, d or d*d entries");
}

}  // namespace

LawSpec ExperimentConfig::law() const {
  const std::size_t d = dimension;
  if (init_law == "point") return LawSpec::point_mass(broadcast_vector(init_x0, d, "init.x0"));
  if (init_law == "gaussian") {
    return LawSpec::gaussian(broadcast_vector(init_mean, d, "init.mean"), broadcast_cov(init_cov, d));
  }
  if (init_law == "uniform") {
    return LawSpec::uniform_box(broadcast_vector(init_lower, d, "init.lower"),
                                broadcast_vector(init_upper, d, "init.upper"));
  }
  throw ConfigError("init.law must be one of point, gaussian, uniform (got '" + init_law + "')");
}

CoefficientModel ExperimentConfig::model() const {
  return make_catalog_model(model_id, model_params, dimension);
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected 'key = value'";
      throw ConfigError(os.str());
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Location at{source, lineno, key};
    if (key.empty()) at.fail("empty key");
    if (!seen.insert(key).second) at.fail("duplicate key");
    if (value.empty()) at.fail("empty value");

    if (const auto it = setters().find(key); it != setters().end()) {
      it->second(cfg, value, at);
    } else if (key.starts_with("model.")) {
      cfg.model_params[key.substr(6)] = to_double(value, at);
    } else {
      at.fail("unknown key");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_config(in, source);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void validate_config(const ExperimentConfig& cfg, const std::string& experiment) {
  static const std::set<std::string> kKinds = {"run", "rate", "moments", "metric", "check"};
  if (!kKinds.contains(experiment)) throw ConfigError("unknown experiment kind '" + experiment + "'");
  if (!cfg.experiment.empty() && cfg.experiment != experiment) {
    throw ConfigError("config declares experiment '" + cfg.experiment + "' but command is '" + experiment + "'");
  }
  if (cfg.dimension == 0) throw ConfigError("sim.d must be positive");
  if (cfg.particles == 0) throw ConfigError("sim.N must be positive");
  if (!(cfg.horizon > 0.0)) throw ConfigError("sim.T must be positive");

  // Model id and parameter names against the catalog schema.
  const auto& schema = catalog_schema(cfg.model_id);
  for (const auto& [key, value] : cfg.model_params) {
    if (!schema.contains(key)) throw ConfigError("model '" + cfg.model_id + "' has no parameter '" + key + "'");
  }
  try {
    (void)cfg.model();
    const LawSpec law = cfg.law();
    (void)sample_initial(law, 1, 0);  // covariance checks
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid model or initial law: ") + e.what());
  }

  if (cfg.metric_coupling != "index" && cfg.metric_coupling != "sorted") {
    throw ConfigError("metric.coupling must be index or sorted");
  }
  if (experiment == "check") {
    if (cfg.check_count < 1000) throw ConfigError("check.count must be at least 1000");
    return;
  }

  const unsigned lattice_cap = cfg.streaming ? BrownianLattice::kMaxStreamingLevel : BrownianLattice::kMaxStoredLevel;
  if (experiment == "rate") {
    if (cfg.levels.size() < 3) throw ConfigError("sim.levels needs at least three levels");
    for (std::size_t i = 1; i < cfg.levels.size(); ++i) {
      if (cfg.levels[i] <= cfg.levels[i - 1]) throw ConfigError("sim.levels must be strictly increasing");
    }
    if (cfg.levels.back() + 4 > cfg.finest_level) throw ConfigError("rate studies need max(sim.levels) <= sim.L - 4");
    if (cfg.finest_level > lattice_cap) throw ConfigError("sim.L exceeds the lattice level cap");
    if (cfg.record_level && *cfg.record_level > cfg.levels.front() && !cfg.record_interpolate) {
      throw ConfigError("record.level finer than the coarsest level requires record.interpolate = true");
    }
    if (cfg.record_level && *cfg.record_level > cfg.finest_level) {
      throw ConfigError("record.level exceeds sim.L");
    }
  } else {
    if (cfg.level > lattice_cap) throw ConfigError("sim.n exceeds the lattice level cap");
    if (cfg.record_level && *cfg.record_level > cfg.level) {
      throw ConfigError("record.level must not exceed sim.n for single-level experiments");
    }
  }
  if (!cfg.streaming && !cfg.rate_synthetic) {
    const unsigned deepest = experiment == "rate" ? cfg.finest_level : cfg.level;
    const std::size_t bytes = BrownianLattice::storage_bytes(cfg.particles, cfg.dimension, deepest);
    if (bytes / (std::size_t{1} << 20) > cfg.memory_cap_mb) {
      throw ConfigError("lattice needs " + std::to_string(bytes >> 20) + " MiB, above sim.memory_cap_mb; set sim.streaming = true");
    }
  }
  if (experiment == "moments") {
    if (!(cfg.p >= 1.0)) throw ConfigError("analysis.p must be at least 1");
    const unsigned rec = cfg.record_level.value_or(cfg.level);
    const std::size_t records = (std::size_t{1} << rec) + 1;
    if (!cfg.lags.empty()) {
      if (cfg.lags.size() < 2 || cfg.lags.back() >= records ||
          static_cast<double>(cfg.lags.back()) < 100.0 * static_cast<double>(cfg.lags.front())) {
        throw ConfigError("analysis.lags must be increasing, within the record grid and span two decades");
      }
      for (std::size_t i = 1; i < cfg.lags.size(); ++i) {
        if (cfg.lags[i] <= cfg.lags[i - 1]) throw ConfigError("analysis.lags must be strictly increasing");
      }
    } else if (records < 8 * 128 + 1) {
      throw ConfigError("default analysis.lags need a record grid of at least level 10; set analysis.lags");
    }
  }
}

}  // namespace mvsde
