// simcache: command-line driver for simulations, offline optima, bounds,
// trace analysis and tessellation certificates.

#include "simcache/bounds.hpp"
#include "simcache/config.hpp"
#include "simcache/offline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace simcache;

namespace {

struct Common {
  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
};

json load_with_overrides(const std::string& path, const Common& c) {
  json cfg = load_config(path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg["seed"] = *c.seed;
  if (c.replicas) cfg["replicas"] = *c.replicas;
  return cfg;
}

fs::path base_of(const std::string& path) {
  const auto p = fs::path(path).parent_path();
  return p.empty() ? fs::path(".") : p;
}

void write_manifest(const fs::path& path, const json& manifest) {
  auto out = open_out(path);
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& metric) {
  if (c.configs.empty()) throw ConfigError("simulate needs --config");
  std::vector<std::pair<std::string, std::vector<ReplicaResult>>> runs;
  json first_space, first_workload;
  for (const auto& path : c.configs) {
    const json cfg = load_with_overrides(path, c);
    const Experiment e = build_experiment(cfg, base_of(path));
    if (runs.empty()) {
      first_space = cfg.at("space");
      first_workload = cfg.at("workload");
    } else if (cfg.at("space") != first_space || cfg.at("workload") != first_workload) {
      throw ConfigError("compared configs must share space and workload");
    }
    auto results = run_experiment(e);
    for (const auto& f : write_outputs(e, results, c.out)) std::cout << "wrote " << f.string() << '\n';
    const auto& last = results.front().records;
    if (!last.empty()) {
      const auto sum = summarize(results).back();
      std::cout << e.output << ": t=" << sum.t << " inst_cost=" << csv::format_double(sum.inst_mean)
                << " avg_cost=" << csv::format_double(sum.avg_cost_mean) << '\n';
    }
    runs.emplace_back(e.output, std::move(results));
  }
  if (runs.size() > 1) {
    const fs::path path = fs::path(c.out) / ("compare_" + metric + ".csv");
    auto out = open_out(path);
    write_comparison(out, runs, metric);
    std::cout << "wrote " << path.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

const char* action_name(OfflineAction a) {
  switch (a) {
    case OfflineAction::exact_hit: return "exact_hit";
    case OfflineAction::approximate: return "approximate";
    case OfflineAction::retrieve: return "retrieve";
    case OfflineAction::store: return "store";
  }
  return "?";
}

int cmd_offline(const Common& c, const std::string& model_name, bool with_static) {
  if (c.configs.size() != 1) throw ConfigError("offline needs exactly one --config");
  const json cfg = load_with_overrides(c.configs.front(), c);
  const Experiment e = build_experiment(cfg, base_of(c.configs.front()));
  TransitionModel model;
  if (model_name == "no_prefetch") model = TransitionModel::no_prefetch;
  else if (model_name == "recurrence") model = TransitionModel::recurrence;
  else if (model_name == "single_swap") model = TransitionModel::single_swap;
  else throw ConfigError("unknown transition model '" + model_name + "'");

  std::vector<ObjectId> requests;
  if (e.source.is_sequence()) {
    requests.assign(e.source.requests().begin(), e.source.requests().begin() + static_cast<std::ptrdiff_t>(e.options.horizon));
  } else {
    Rng rng(e.options.seed);
    RequestSource::Cursor cursor(e.source);
    for (std::uint64_t t = 1; t <= e.options.horizon; ++t) requests.push_back(cursor.next(t, rng));
  }
  const std::vector<ObjectId> initial =
      e.policy.initial.empty() ? std::visit([&](const auto& s) { return draw_initial_state(s, e.policy.k, e.options.seed, 0); }, e.space)
                               : e.policy.initial;

  const OfflineSolution sol = std::visit(
      [&](const auto& s) { return dp_optimal(s, e.cm, std::span<const ObjectId>(requests), std::span<const ObjectId>(initial), model); },
      e.space);

  const fs::path path = fs::path(c.out) / (e.output + "_offline.csv");
  auto out = open_out(path);
  out << "t,request,action,state\n";
  out << 0 << ",,initial,";
  for (std::size_t i = 0; i < sol.states[0].size(); ++i) out << (i ? " " : "") << sol.states[0][i];
  out << '\n';
  for (std::size_t t = 0; t < requests.size(); ++t) {
    out << t + 1 << ',' << requests[t] << ',' << action_name(sol.actions[t]) << ',';
    for (std::size_t i = 0; i < sol.states[t + 1].size(); ++i) out << (i ? " " : "") << sol.states[t + 1][i];
    out << '\n';
  }
  std::cout << "optimal_cost " << csv::format_double(sol.total_cost) << '\n';

  json manifest = build_manifest(cfg, "offline");
  manifest["transition_model"] = model_name;
  manifest["optimal_cost"] = sol.total_cost;
  if (with_static) {
    const auto st = std::visit(
        [&](const auto& s) {
          return std::make_pair(static_brute_force(s, e.cm, std::span<const ObjectId>(requests), e.policy.k),
                                static_greedy(s, e.cm, std::span<const ObjectId>(requests), e.policy.k));
        },
        e.space);
    std::cout << "static_optimal_cost " << csv::format_double(st.first.cost) << '\n'
              << "static_greedy_cost " << csv::format_double(st.second.cost) << '\n';
    manifest["static_optimal"] = {{"cost", st.first.cost}, {"state", st.first.state}};
    manifest["static_greedy"] = {{"cost", st.second.cost}, {"state", st.second.state}};
  }
  write_manifest(fs::path(c.out) / (e.output + "_offline_manifest.json"), manifest);
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct BoundsArgs {
  int l = 2;
  int side = 0;
  double gamma = 1.0;
  std::size_t k = 0;
  std::string retrieval = "inf";
  bool homogeneous = false;
  double sigma = 0.0;
  std::string name = "bounds";
};

int cmd_bounds(const Common& c, const BoundsArgs& a) {
  const int L = a.side > 0 ? a.side : grid_side(a.l);
  const TorusGrid grid(L, a.gamma);
  const std::size_t k = a.k ? a.k : static_cast<std::size_t>(L);
  double cr;
  if (!csv::parse_double(a.retrieval, cr) || !(cr > 0.0)) throw ConfigError("--retrieval must be positive or inf");
  if (a.homogeneous == (a.sigma > 0.0)) throw ConfigError("choose exactly one of --homogeneous and --sigma");
  const PopularityField rates = a.homogeneous ? PopularityField::uniform(grid.size()) : gaussian_rates(grid, a.sigma);
  const auto dense = rates.to_dense();

  std::vector<std::pair<std::string, double>> rows;
  BallCostFn fn{.norm = 1, .dim = 2, .gamma = a.gamma, .retrieval = cr};
  if (a.homogeneous) {
    const double area = static_cast<double>(grid.size());
    rows.emplace_back("lower_bound", lower_bound(fn, 1.0 / area, area, k));
  }
  const auto approx = approx_min_cost(dense, 1.0, k, a.gamma, cr);
  rows.emplace_back("approximation", approx.value);
  rows.emplace_back("approximation_threshold", approx.threshold);

  const CostModel cm = std::isinf(cr) ? CostModel::extended(1.0, 0.0, true) : CostModel(cr);
  const int l_of_side = [&] {
    for (int l = 1; grid_side(l) <= L; ++l)
      if (grid_side(l) == L) return l;
    return 0;
  }();
  if (l_of_side > 0 && k == static_cast<std::size_t>(L)) {
    const auto centers = tessellation_centers(grid, l_of_side);
    const auto cert = certify_tessellation(grid, centers);
    rows.emplace_back("tessellation", cert.tessellation ? 1.0 : 0.0);
    rows.emplace_back("tessellation_cost", expected_cost(grid, cm, rates, std::span<const ObjectId>(centers)).value());
  }

  const fs::path path = fs::path(c.out) / (a.name + ".csv");
  auto out = open_out(path);
  out << "quantity,value\n";
  for (const auto& [q, v] : rows) {
    out << q << ',' << csv::format_double(v) << '\n';
    std::cout << q << ' ' << csv::format_double(v) << '\n';
  }
  json manifest = build_manifest(json{{"side", L}, {"gamma", a.gamma}, {"k", k}, {"retrieval", a.retrieval},
                                      {"homogeneous", a.homogeneous}, {"sigma", a.sigma}},
                                 "bounds");
  write_manifest(fs::path(c.out) / (a.name + "_manifest.json"), manifest);
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TraceArgs {
  std::string trace;
  std::size_t min_count = 0;
  std::string mapping = "spiral";
  int l = 0;
  int side = 0;
  std::uint64_t seed = 0;
  std::string name = "trace";
};

int cmd_trace(const Common& c, const TraceArgs& a) {
  if (a.trace.empty()) throw ConfigError("trace-analyze needs --trace");
  const auto trace = read_trace(a.trace, a.min_count);
  if (trace.size() < 2) throw ConfigError("trace needs at least two records");
  const fs::path dir(c.out);

  const auto ranking = popularity_ranking(trace);
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : trace) ++counts[r.key];
  {
    auto out = open_out(dir / (a.name + "_ranking.csv"));
    out << "rank,key,count\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) out << i + 1 << ',' << ranking[i] << ',' << counts[ranking[i]] << '\n';
  }
  const double tau = popularity_drift(trace);
  {
    auto out = open_out(dir / (a.name + "_drift.csv"));
    out << "records,objects,tau_b\n" << trace.size() << ',' << ranking.size() << ',' << csv::format_double(tau) << '\n';
  }
  std::cout << "records " << trace.size() << "\nobjects " << ranking.size() << "\ntau_b " << csv::format_double(tau) << '\n';

  if (a.mapping != "none") {
    if (a.mapping != "uniform" && a.mapping != "spiral") throw ConfigError("--mapping must be uniform, spiral or none");
    int L = a.side > 0 ? a.side : (a.l > 0 ? grid_side(a.l) : 0);
    if (L == 0) {
      L = 1;
      while (static_cast<std::size_t>(L) * L < ranking.size()) ++L;
    }
    const TorusGrid grid(L, 1.0);
    const auto mapped = map_trace(trace, grid, a.mapping == "spiral" ? TraceMapping::spiral : TraceMapping::uniform, a.seed);
    const ObjectId center = grid.id(L / 2, L / 2);
    auto out = open_out(dir / (a.name + "_mapping.csv"));
    out << "key,object,row,col,hops_from_center\n";
    for (const auto& [key, id] : mapped.assignment)
      out << key << ',' << id << ',' << grid.point(id).row << ',' << grid.point(id).col << ',' << grid.hops(id, center) << '\n';
    auto req = open_out(dir / (a.name + "_requests.csv"));
    req << "timestamp,object\n";
    for (std::size_t i = 0; i < mapped.requests.size(); ++i)
      req << csv::format_double(mapped.timestamps[i]) << ',' << mapped.requests[i] << '\n';
    std::cout << "grid_side " << L << '\n';
  }
  json manifest = build_manifest(json{{"trace", a.trace}, {"min_count", a.min_count}, {"mapping", a.mapping}, {"seed", a.seed}},
                                 "trace-analyze");
  manifest["tau_b"] = tau;
  write_manifest(dir / (a.name + "_manifest.json"), manifest);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_certify(const Common& c, int l, const std::string& pattern, const std::string& centers_path) {
  const TorusGrid grid(grid_side(l), 1.0);
  std::vector<ObjectId> centers;
  if (!centers_path.empty()) {
    auto in = csv::open_in(centers_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (csv::trim(line).empty() || csv::trim(line).front() == '#') continue;
      const auto f = csv::split(line);
      double r, col;
      if (f.size() != 2 || !csv::parse_double(f[0], r) || !csv::parse_double(f[1], col)) {
        if (lineno == 1) continue;
        throw ConfigError("line " + std::to_string(lineno) + ": expected row,col");
      }
      centers.push_back(grid.id(static_cast<int>(r), static_cast<int>(col)));
    }
  } else if (pattern == "knight") {
    centers = tessellation_centers(grid, l);
  } else {
    throw ConfigError("certify needs --pattern knight or --centers FILE");
  }
  const auto cert = certify_tessellation(grid, centers);
  std::cout << "tessellation: " << (cert.tessellation ? "true" : "false") << '\n'
            << "radius: " << cert.radius << '\n'
            << "uncovered: " << cert.uncovered << '\n'
            << "overcovered: " << cert.overcovered << '\n';
  const fs::path path = fs::path(c.out) / ("certificate_l" + std::to_string(l) + ".csv");
  auto out = open_out(path);
  out << "object,row,col,owner,center\n";
  std::vector<char> is_center(grid.size(), 0);
  for (ObjectId x : centers) is_center[x] = 1;
  for (ObjectId x = 0; x < grid.size(); ++x)
    out << x << ',' << grid.point(x).row << ',' << grid.point(x).col << ','
        << (cert.tessellation ? std::to_string(cert.owner[x]) : std::string()) << ',' << int(is_center[x]) << '\n';
  return cert.tessellation ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity caching simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", common.configs, "Experiment config (JSON)");
      sub->add_option("--set", common.overrides, "Override a config key, e.g. policy.q=0.01");
      sub->add_option("--seed", common.seed, "Override the config seed");
      sub->add_option("--replicas", common.replicas, "Override the replica count");
    }
    sub->add_option("--out", common.out, "Output directory");
  };

  std::string metric = "inst_cost";
  auto* sim = app.add_subcommand("simulate", "Run policies on a workload");
  add_common(sim, true);
  sim->add_option("--metric", metric, "Comparison column when several configs are given");

  std::string model = "no_prefetch";
  bool with_static = false;
  auto* off = app.add_subcommand("offline", "Optimal offline schedule for a request sequence");
  add_common(off, true);
  off->add_option("--model", model, "no_prefetch | recurrence | single_swap");
  off->add_flag("--static", with_static, "Also report the best static allocation");

  BoundsArgs ba;
  auto* bnd = app.add_subcommand("bounds", "Lower bound, approximation and tessellation cost on a torus grid");
  add_common(bnd, false);
  bnd->add_flag("--homogeneous", ba.homogeneous, "Uniform rates");
  bnd->add_option("--sigma", ba.sigma, "Gaussian rates with this spread");
  bnd->add_option("--l", ba.l, "Grid parameter, side 1+2l(l+1)");
  bnd->add_option("--side", ba.side, "Grid side (overrides --l)");
  bnd->add_option("--gamma", ba.gamma, "Cost exponent");
  bnd->add_option("--k", ba.k, "Cache size (default: side)");
  bnd->add_option("--retrieval", ba.retrieval, "Retrieval cost (number or inf)");
  bnd->add_option("--name", ba.name, "Report file stem");

  TraceArgs ta;
  auto* tr = app.add_subcommand("trace-analyze", "Popularity ranking, drift and grid mapping of a trace");
  add_common(tr, false);
  tr->add_option("--trace", ta.trace, "Trace CSV (timestamp,key[,features])");
  tr->add_option("--min-count", ta.min_count, "Drop objects requested fewer times");
  tr->add_option("--mapping", ta.mapping, "uniform | spiral | none");
  tr->add_option("--l", ta.l, "Grid parameter");
  tr->add_option("--side", ta.side, "Grid side");
  tr->add_option("--seed", ta.seed, "Seed of the uniform mapping");
  tr->add_option("--name", ta.name, "Output file stem");

  int cl = 2;
  std::string pattern, centers;
  auto* cert = app.add_subcommand("certify", "Check that a center set tessellates the torus grid");
  add_common(cert, false);
  cert->add_option("--l", cl, "Grid parameter, side 1+2l(l+1)");
  cert->add_option("--pattern", pattern, "Built-in center set (knight)");
  cert->add_option("--centers", centers, "CSV of row,col centers")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(common, metric);
    if (*off) return cmd_offline(common, model, with_static);
    if (*bnd) return cmd_bounds(common, ba);
    if (*tr) return cmd_trace(common, ta);
    if (*cert) return cmd_certify(common, cl, pattern, centers);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ScaleGuardError& e) {
    std::cerr << "scale guard: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
