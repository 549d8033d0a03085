#pragma once

#include "simcache/csv.hpp"
#include "simcache/errors.hpp"
#include "simcache/harness.hpp"
#include "simcache/workloads.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace simcache {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Loading and overrides.

inline json parse_config(std::istream& in, const std::string& origin = "config") {
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_config(in, path.string());
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses, else as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key: " + key);
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key crosses a non-object: " + key);
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

/// 64-bit FNV-1a over the compact serialization.
inline std::uint64_t config_hash(const json& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Field access with config errors.

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, where);
}

/// Number, or one of the strings "inf" / "infinity".
inline double number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  double out;
  if (v.is_string() && csv::parse_double(v.get<std::string>(), out)) return out;
  throw ConfigError(where + ": expected a number");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment.

using AnySpace = std::variant<TorusGrid, FiniteSpace, PointCloud>;

struct Experiment {
  json config;
  AnySpace space = FiniteSpace(1, {0.0});
  CostModel cm{1.0};
  RequestSource source = RequestSource::sequence({0});
  std::optional<PopularityField> known_rates;
  PolicySpec policy;
  RunOptions options;
  std::string output = "run";
  /// Trace key per catalog object, when the catalog comes from a trace.
  std::vector<std::pair<std::string, ObjectId>> assignment;

  std::size_t catalog_size() const {
    return std::visit([](const auto& s) { return s.size(); }, space);
  }
};

inline CostModel parse_cost(const json& j) {
  const std::string w = "cost";
  try {
    if (j.contains("user") || j.contains("network"))
      return CostModel::extended(detail::number(detail::require(j, "user", w), w + ".user"),
                                 detail::number(detail::require(j, "network", w), w + ".network"),
                                 detail::get_or<bool>(j, "require_store", false, w));
    return CostModel(detail::number(detail::require(j, "retrieval", w), w + ".retrieval"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(w + ": " + e.what());
  }
}

inline FiniteSpace parse_matrix(const json& j, const std::filesystem::path& base) {
  const std::string w = "space";
  if (j.contains("path")) return csv::read_matrix(detail::resolve(base, detail::get<std::string>(j, "path", w)).string());
  const json& rows = detail::require(j, "values", w);
  if (!rows.is_array() || rows.empty()) throw ConfigError("space.values must be a non-empty array of rows");
  const std::size_t n = rows.size();
  std::vector<double> values;
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != n) throw ConfigError("space.values must be square");
    for (const auto& v : row) values.push_back(detail::number(v, "space.values"));
  }
  try {
    return FiniteSpace(n, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("space: ") + e.what());
  }
}

inline TorusGrid parse_grid(const json& j) {
  const std::string w = "space";
  const double gamma = detail::get_or<double>(j, "gamma", 1.0, w);
  int side = 0;
  if (j.contains("l")) side = grid_side(detail::get<int>(j, "l", w));
  else side = detail::get<int>(j, "side", w);
  if (side < 1) throw ConfigError("space: grid side must be positive");
  if (static_cast<double>(side) * side > 4e9) throw ScaleGuardError("grid too large");
  try {
    return TorusGrid(side, gamma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("space: ") + e.what());
  }
}

inline std::optional<ObjectId> parse_center(const json& j, const TorusGrid& grid, const std::string& w) {
  if (!j.contains("center")) return std::nullopt;
  const json& c = j.at("center");
  if (!c.is_array() || c.size() != 2) throw ConfigError(w + ".center must be [row, col]");
  return grid.id(c[0].get<int>(), c[1].get<int>());
}

/// Rate field spec: {"kind": uniform | gaussian | zipf | explicit | file, ...}.
inline PopularityField parse_rates(const json& j, const AnySpace& space, const std::filesystem::path& base,
                                   const std::string& w) {
  const std::size_t n = std::visit([](const auto& s) { return s.size(); }, space);
  const std::string kind = detail::get_or<std::string>(j, "kind", "uniform", w);
  try {
    if (kind == "uniform") return PopularityField::uniform(n);
    if (kind == "gaussian") {
      const auto* grid = std::get_if<TorusGrid>(&space);
      if (!grid) throw ConfigError(w + ": gaussian rates need a grid space");
      double sigma;
      if (j.contains("sigma_over_side")) sigma = grid->side() * detail::get<double>(j, "sigma_over_side", w);
      else sigma = detail::get<double>(j, "sigma", w);
      return gaussian_rates(*grid, sigma, parse_center(j, *grid, w));
    }
    if (kind == "zipf") {
      const double alpha = detail::get<double>(j, "alpha", w);
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = std::pow(static_cast<double>(i + 1), -alpha);
      return PopularityField::dense(std::move(r)).normalized();
    }
    if (kind == "explicit") {
      const json& v = detail::require(j, "values", w);
      if (!v.is_array() || v.size() != n) throw ConfigError(w + ".values must list one rate per object");
      std::vector<double> r;
      for (const auto& x : v) r.push_back(detail::number(x, w + ".values"));
      return PopularityField::dense(std::move(r)).normalized();
    }
    if (kind == "file") {
      const auto path = detail::resolve(base, detail::get<std::string>(j, "path", w)).string();
      if (detail::get_or<std::string>(j, "format", "pairs", w) == "grid") {
        auto in = csv::open_in(path);
        auto r = csv::read_grid(in);
        if (r.size() != n) throw ConfigError(w + ": rate grid does not match the catalog");
        return PopularityField::dense(std::move(r)).normalized();
      }
      return csv::read_rates(path, n).normalized();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const IoError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(w + ": " + e.what());
  }
  throw ConfigError(w + ": unknown rate kind '" + kind + "'");
}

inline TemperatureSchedule parse_schedule(const json& j) {
  const std::string w = "policy.schedule";
  TemperatureSchedule s;
  const std::string kind = detail::get_or<std::string>(j, "kind", "power", w);
  if (kind == "logarithmic") s.kind = TemperatureSchedule::Kind::logarithmic;
  else if (kind == "power") s.kind = TemperatureSchedule::Kind::power;
  else if (kind == "fixed") s.kind = TemperatureSchedule::Kind::fixed;
  else throw ConfigError(w + ": unknown kind '" + kind + "'");
  s.scale = detail::get_or<double>(j, "scale", s.scale, w);
  s.exponent = detail::get_or<double>(j, "exponent", s.exponent, w);
  s.fixed = detail::get_or<double>(j, "value", s.fixed, w);
  s.delta_max = detail::get_or<double>(j, "delta_max", s.delta_max, w);
  return s;
}

inline PolicySpec parse_policy(const json& j, std::size_t catalog) {
  const std::string w = "policy";
  PolicySpec p;
  p.name = detail::get<std::string>(j, "name", w);
  if (std::find(policy_names().begin(), policy_names().end(), p.name) == policy_names().end())
    throw ConfigError("policy: unknown name '" + p.name + "'");
  p.k = detail::get<std::size_t>(j, "k", w);
  if (p.k == 0 || p.k > catalog) throw ConfigError("policy.k must be in [1, catalog size]");
  p.q = detail::get_or<double>(j, "q", p.q, w);
  if (!(p.q > 0.0 && p.q <= 1.0)) throw ConfigError("policy.q must be in (0, 1]");
  if (j.contains("schedule")) p.schedule = parse_schedule(j.at("schedule"));
  const std::string ev = detail::get_or<std::string>(j, "eviction", "uniform", w);
  if (ev != "uniform" && ev != "weighted") throw ConfigError("policy.eviction must be uniform or weighted");
  p.weighted_eviction = ev == "weighted";
  if (j.contains("duel")) {
    const json& d = j.at("duel");
    p.duel_f = detail::get_or<double>(d, "f", 0.0, "policy.duel");
    p.duel.delta = detail::get_or<double>(d, "delta", p.duel.delta, "policy.duel");
    p.duel.tau = detail::get_or<double>(d, "tau", p.duel.tau, "policy.duel");
    p.duel.beta = detail::get_or<double>(d, "beta", p.duel.beta, "policy.duel");
    try {
      p.duel.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("policy.duel: ") + e.what());
    }
  }
  if (j.contains("initial")) {
    p.initial = detail::get<std::vector<ObjectId>>(j, "initial", w);
    if (p.initial.size() != p.k) throw ConfigError("policy.initial must list exactly k objects");
    std::vector<ObjectId> s = p.initial;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end() || s.back() >= catalog)
      throw ConfigError("policy.initial must list distinct catalog objects");
  }
  return p;
}

inline std::vector<std::uint64_t> parse_checkpoints(const json& cfg, std::uint64_t horizon) {
  if (!cfg.contains("checkpoints") || cfg.at("checkpoints").is_null()) return geometric_checkpoints(horizon);
  const json& c = cfg.at("checkpoints");
  if (c.is_string()) {
    if (c.get<std::string>() != "geometric") throw ConfigError("checkpoints: unknown schedule");
    return geometric_checkpoints(horizon);
  }
  if (c.is_object()) return geometric_checkpoints(horizon, detail::get_or<int>(c, "per_decade", 20, "checkpoints"));
  if (c.is_array()) {
    std::vector<std::uint64_t> out;
    for (const auto& v : c) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("checkpoints must be integers");
      const auto t = v.get<std::int64_t>();
      if (t < 1 || static_cast<std::uint64_t>(t) > horizon) throw ConfigError("checkpoint outside [1, horizon]");
      out.push_back(static_cast<std::uint64_t>(t));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  throw ConfigError("checkpoints: expected \"geometric\", {\"per_decade\": n} or a list");
}

/// Builds an experiment from a parsed config; relative paths resolve against `base`.
inline Experiment build_experiment(const json& cfg, const std::filesystem::path& base = ".") {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  Experiment e;
  e.config = cfg;
  const json& sp = detail::require(cfg, "space", "config");
  const json& wl = detail::require(cfg, "workload", "config");
  const std::string space_type = detail::get<std::string>(sp, "type", "space");
  const std::string wl_type = detail::get<std::string>(wl, "type", "workload");

  e.cm = parse_cost(detail::require(cfg, "cost", "config"));

  std::optional<std::vector<TraceRecord>> trace;
  if (wl_type == "trace") {
    const auto path = detail::resolve(base, detail::get<std::string>(wl, "path", "workload")).string();
    trace = read_trace(path, detail::get_or<std::size_t>(wl, "min_count", 0, "workload"));
    if (trace->empty()) throw ConfigError("workload: trace is empty");
  } else if (wl_type != "irm") {
    throw ConfigError("workload: unknown type '" + wl_type + "'");
  }

  if (space_type == "grid") e.space = parse_grid(sp);
  else if (space_type == "matrix") e.space = parse_matrix(sp, base);
  else if (space_type == "embedding") {
    if (!trace) throw ConfigError("space: embedding needs a trace workload");
    auto emb = embed_trace(*trace, detail::get_or<int>(sp, "norm", 2, "space"), detail::get_or<double>(sp, "gamma", 1.0, "space"));
    for (std::size_t i = 0; i < emb.keys.size(); ++i) e.assignment.emplace_back(emb.keys[i], static_cast<ObjectId>(i));
    e.known_rates = empirical_rates(emb.requests, emb.space.size());
    e.source = RequestSource::sequence(std::move(emb.requests));
    e.space = std::move(emb.space);
  } else {
    throw ConfigError("space: unknown type '" + space_type + "'");
  }

  if (wl_type == "irm") {
    std::vector<RequestSource::Phase> phases;
    if (wl.contains("phases")) {
      const json& ph = wl.at("phases");
      if (!ph.is_array() || ph.empty()) throw ConfigError("workload.phases must be a non-empty array");
      for (std::size_t i = 0; i < ph.size(); ++i) {
        const std::string w = "workload.phases[" + std::to_string(i) + "]";
        RequestSource::Phase p{parse_rates(detail::require(ph[i], "rates", w), e.space, base, w + ".rates"),
                               detail::get_or<std::uint64_t>(ph[i], "until", 0, w)};
        if (!phases.empty() && (phases.back().until == 0 || (p.until != 0 && p.until <= phases.back().until)))
          throw ConfigError(w + ": phase ends must increase");
        phases.push_back(std::move(p));
      }
    } else {
      phases.push_back({parse_rates(wl.value("rates", json::object()), e.space, base, "workload.rates"), 0});
    }
    e.known_rates = phases.front().rates;
    e.source = RequestSource::irm(std::move(phases));
  } else if (space_type == "grid") {
    const auto& grid = std::get<TorusGrid>(e.space);
    const std::string mode = detail::get_or<std::string>(wl, "mapping", "uniform", "workload");
    if (mode != "uniform" && mode != "spiral") throw ConfigError("workload.mapping must be uniform or spiral");
    auto mapped = map_trace(*trace, grid, mode == "spiral" ? TraceMapping::spiral : TraceMapping::uniform,
                            detail::get_or<std::uint64_t>(wl, "mapping_seed", 0, "workload"));
    e.known_rates = empirical_rates(mapped.requests, grid.size());
    e.assignment = std::move(mapped.assignment);
    e.source = RequestSource::sequence(std::move(mapped.requests));
  } else if (space_type != "embedding") {
    throw ConfigError("space: trace workloads need a grid or embedding space");
  }

  e.policy = parse_policy(detail::require(cfg, "policy", "config"), e.catalog_size());
  const auto horizon_default = e.source.is_sequence() ? static_cast<std::uint64_t>(e.source.sequence_length()) : 0;
  e.options.horizon = detail::get_or<std::uint64_t>(cfg, "horizon", horizon_default, "config");
  if (!e.source.is_sequence() && !cfg.contains("horizon")) throw ConfigError("config: missing 'horizon'");
  if (e.source.is_sequence() && e.options.horizon > e.source.sequence_length())
    throw ConfigError("horizon exceeds the trace length");
  e.options.checkpoints = parse_checkpoints(cfg, e.options.horizon);
  e.options.seed = detail::get_or<std::uint64_t>(cfg, "seed", 1, "config");
  e.options.replicas = detail::get_or<std::size_t>(cfg, "replicas", 1, "config");
  if (e.options.replicas == 0) throw ConfigError("replicas must be at least 1");
  e.output = detail::get_or<std::string>(cfg, "output", "run", "config");
  return e;
}

inline std::vector<ReplicaResult> run_experiment(const Experiment& e) {
  return std::visit(
      [&](const auto& space) {
        using S = std::decay_t<decltype(space)>;
        Instance<S> inst;
        inst.space = &space;
        inst.cm = e.cm;
        inst.source = e.source;
        inst.known_rates = e.known_rates;
        return run(inst, e.policy, e.options);
      },
      e.space);
}

// ---------------------------------------------------------------------------
// Output.

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline json build_manifest(const json& cfg, const std::string& command) {
  json m;
  m["command"] = command;
  m["config"] = cfg;
  m["config_hash"] = hex64(config_hash(cfg));
  m["seed"] = cfg.value("seed", json(1));
  m["replicas"] = cfg.value("replicas", json(1));
  m["versions"] = {{"simcache", "1.0.0"}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}};
  return m;
}

/// Writes <out>/<name>.csv, <name>_summary.csv, <name>_final.csv and <name>_manifest.json.
inline std::vector<std::filesystem::path> write_outputs(const Experiment& e, const std::vector<ReplicaResult>& results,
                                                        const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  const auto stem = dir / e.output;
  {
    auto path = stem;
    path += ".csv";
    auto out = open_out(path);
    write_records(out, results);
    files.push_back(path);
  }
  {
    auto path = stem;
    path += "_summary.csv";
    auto out = open_out(path);
    write_summary(out, summarize(results));
    files.push_back(path);
  }
  {
    auto path = stem;
    path += "_final.csv";
    auto out = open_out(path);
    out << "replica,object,row,col\n";
    const auto* grid = std::get_if<TorusGrid>(&e.space);
    for (const auto& r : results) {
      for (ObjectId x : r.final_state) {
        out << r.replica << ',' << x << ',';
        if (grid) out << grid->point(x).row << ',' << grid->point(x).col;
        else out << ',';
        out << '\n';
      }
    }
    files.push_back(path);
  }
  if (!e.assignment.empty()) {
    auto path = stem;
    path += "_mapping.csv";
    auto out = open_out(path);
    out << "key,object\n";
    for (const auto& [k, id] : e.assignment) out << k << ',' << id << '\n';
    files.push_back(path);
  }
  {
    auto path = stem;
    path += "_manifest.json";
    auto out = open_out(path);
    json m = build_manifest(e.config, "simulate");
    json stats = json::array();
    for (const auto& r : results) stats.push_back({{"replica", r.replica}, {"stats", r.stats}});
    m["replica_stats"] = stats;
    out << m.dump(2) << '\n';
    files.push_back(path);
  }
  for (const auto& f : files)
    if (!std::filesystem::exists(f)) throw IoError("failed to write " + f.string());
  return files;
}

}  // namespace simcache
