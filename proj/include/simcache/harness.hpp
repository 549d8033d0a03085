#pragma once

#include "simcache/costs.hpp"
#include "simcache/errors.hpp"
#include "simcache/policies/duel.hpp"
#include "simcache/policies/exact.hpp"
#include "simcache/policies/lambda_aware.hpp"
#include "simcache/policies/lru_family.hpp"
#include "simcache/workloads.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace simcache {

// ---------------------------------------------------------------------------
// Run records and checkpoints.

struct RunRecord {
  std::uint64_t t = 0;
  /// Expected cost C(S_t) of the state after request t (NaN when no rate field applies).
  double inst_cost = 0.0;
  double acc_cost = 0.0;
  double acc_approx_cost = 0.0;
  std::uint64_t exact_hits = 0;
  std::uint64_t approx_hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t state_changes = 0;
  std::size_t replica = 0;
};

inline const char* kRecordHeader =
    "t,inst_cost,acc_cost,acc_approx_cost,exact_hits,approx_hits,misses,state_changes,replica,avg_cost,avg_approx_cost";

void write_record(std::ostream& os, const RunRecord& r);

/// 1, then `per_decade` geometrically spaced points per decade, then the horizon.
inline std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t horizon, int per_decade = 20) {
  std::vector<std::uint64_t> out;
  if (horizon == 0) return out;
  if (per_decade < 1) throw ConfigError("checkpoints per decade must be positive");
  for (int j = 0;; ++j) {
    const double v = std::round(std::pow(10.0, static_cast<double>(j) / per_decade));
    if (v >= static_cast<double>(horizon)) break;
    const auto t = static_cast<std::uint64_t>(v);
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

// ---------------------------------------------------------------------------
// Request sources.

/// IRM phases (each active until a request index) or a fixed sequence.
class RequestSource {
 public:
  struct Phase {
    PopularityField rates;
    /// Last request index (inclusive) served by this phase; 0 = unbounded.
    std::uint64_t until = 0;
  };

  static RequestSource irm(std::vector<Phase> phases) {
    if (phases.empty()) throw ConfigError("IRM workload needs at least one phase");
    RequestSource s;
    s.phases_ = std::move(phases);
    return s;
  }

  static RequestSource sequence(std::vector<ObjectId> requests) {
    RequestSource s;
    s.sequence_ = std::make_shared<const std::vector<ObjectId>>(std::move(requests));
    return s;
  }

  bool is_sequence() const noexcept { return sequence_ != nullptr; }
  std::size_t sequence_length() const noexcept { return sequence_ ? sequence_->size() : 0; }
  const std::vector<ObjectId>& requests() const { return *sequence_; }
  const std::vector<Phase>& phases() const noexcept { return phases_; }

  /// Rate field in force at request t (IRM only).
  const PopularityField& rates_at(std::uint64_t t) const {
    for (const auto& p : phases_)
      if (p.until == 0 || t <= p.until) return p.rates;
    return phases_.back().rates;
  }

  /// Per-replica cursor.
  class Cursor {
   public:
    explicit Cursor(const RequestSource& src) : src_(&src) {
      for (const auto& p : src.phases_) streams_.emplace_back(p.rates);
    }
    template <class R>
    ObjectId next(std::uint64_t t, R& rng) {
      if (src_->sequence_) return (*src_->sequence_)[(t - 1) % src_->sequence_->size()];
      std::size_t i = 0;
      while (i + 1 < src_->phases_.size() && src_->phases_[i].until != 0 && t > src_->phases_[i].until) ++i;
      return streams_[i].next(rng).object;
    }

   private:
    const RequestSource* src_;
    std::vector<IrmStream> streams_;
  };

 private:
  std::vector<Phase> phases_;
  std::shared_ptr<const std::vector<ObjectId>> sequence_;
};

// ---------------------------------------------------------------------------
// Policies.

struct PolicySpec {
  std::string name = "lru";
  std::size_t k = 1;
  double q = 0.01;
  TemperatureSchedule schedule{};
  bool weighted_eviction = false;
  DuelParams duel{};
  /// When positive, Duel's delta and tau are derived as f * min C_a and f * L.
  double duel_f = 0.0;
  /// Explicit initial state; drawn uniformly per replica when empty.
  std::vector<ObjectId> initial;
};

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"greedy", "osa", "qlru_dc", "rnd_lru", "duel", "lru", "random"};
  return names;
}

/// Smallest positive off-diagonal approximation cost.
template <ObjectSpace S>
double min_approx_cost(const S& space) {
  if constexpr (std::is_same_v<S, TorusGrid>) {
    return space.cost_at(1);
  } else if constexpr (DiscreteSpace<S>) {
    double best = std::numeric_limits<double>::infinity();
    for (ObjectId x = 0; x < space.size(); ++x)
      for (ObjectId y = 0; y < space.size(); ++y)
        if (x != y && space.raw(x, y) > 0.0) best = std::min(best, space.raw(x, y));
    return best;
  } else {
    throw ConfigError("duel delta must be given explicitly on a continuous space");
  }
}

/// Side length used for Duel's timeout: the grid side, sqrt(|X|) otherwise.
template <ObjectSpace S>
double side_length(const S& space) {
  if constexpr (std::is_same_v<S, TorusGrid>) return space.side();
  else if constexpr (DiscreteSpace<S>) return std::sqrt(static_cast<double>(space.size()));
  else throw ConfigError("duel tau must be given explicitly on a continuous space");
}

template <ObjectSpace S>
DuelParams resolve_duel_params(const S& space, const PolicySpec& spec) {
  DuelParams p = spec.duel;
  if (spec.duel_f > 0.0) {
    p.delta = spec.duel_f * min_approx_cost(space);
    p.tau = spec.duel_f * side_length(space);
  }
  p.validate();
  return p;
}

template <ObjectSpace S>
std::unique_ptr<Policy<S>> make_policy(const S& space, const CostModel& cm, const PolicySpec& spec,
                                       const PopularityField* rates) {
  const auto& n = spec.name;
  if (n == "lru") return std::make_unique<LruPolicy<S>>(space, cm);
  if (n == "random") return std::make_unique<RandomPolicy<S>>(space, cm);
  if (n == "qlru_dc") return std::make_unique<QlruDcPolicy<S>>(space, cm, spec.q);
  if (n == "rnd_lru") return std::make_unique<RndLruPolicy<S>>(space, cm, spec.q);
  if (n == "duel") return std::make_unique<DuelPolicy<S>>(space, cm, resolve_duel_params(space, spec));
  if (n == "greedy" || n == "osa") {
    if constexpr (DiscreteSpace<S>) {
      if (!rates) throw ConfigError(n + " needs a known rate field");
      if (n == "greedy") return std::make_unique<GreedyPolicy<S>>(space, cm, *rates);
      return std::make_unique<OsaPolicy<S>>(space, cm, *rates, spec.schedule,
                                            spec.weighted_eviction ? OsaPolicy<S>::Eviction::weighted
                                                                   : OsaPolicy<S>::Eviction::uniform);
    } else {
      throw ConfigError(n + " needs a discrete catalog");
    }
  }
  throw ConfigError("unknown policy '" + n + "'");
}

// ---------------------------------------------------------------------------
// Simulation.

template <DiscreteSpace S>
struct Instance {
  const S* space = nullptr;
  CostModel cm{1.0};
  RequestSource source;
  /// Rates known to rate-aware policies (IRM: first phase; traces: empirical).
  std::optional<PopularityField> known_rates;
  /// Rates used for the instantaneous expected cost (phase-dependent for IRM).
  bool track_inst_cost = true;
};

struct ReplicaResult {
  std::size_t replica = 0;
  std::vector<RunRecord> records;
  std::vector<ObjectId> initial_state;
  std::vector<ObjectId> final_state;
  std::map<std::string, double> stats;
};

struct RunOptions {
  std::uint64_t horizon = 0;
  std::vector<std::uint64_t> checkpoints;
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  std::size_t threads = 0;
};

/// Seed used to draw replica i's initial state; shared by all policies.
inline std::uint64_t initial_state_seed(std::uint64_t seed, std::size_t replica) {
  return (seed + replica) ^ 0x9e3779b97f4a7c15ULL;
}

template <DiscreteSpace S>
std::vector<ObjectId> draw_initial_state(const S& space, std::size_t k, std::uint64_t seed, std::size_t replica) {
  if (k == 0 || k > space.size()) throw ConfigError("cache size must be in [1, catalog size]");
  Rng rng(initial_state_seed(seed, replica));
  std::vector<ObjectId> all(space.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<ObjectId>(i);
  std::vector<ObjectId> out;
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

/// Runs one replica. Every request is charged twice: by the policy's decision
/// and by an independent recomputation of movement + service cost from the
/// states before and after; any mismatch aborts the run.
template <DiscreteSpace S>
ReplicaResult run_replica(const Instance<S>& inst, const PolicySpec& spec, const RunOptions& opt, std::size_t replica) {
  ReplicaResult res;
  res.replica = replica;
  const S& space = *inst.space;
  const CostModel& cm = inst.cm;
  auto policy = make_policy(space, cm, spec, inst.known_rates ? &*inst.known_rates : nullptr);
  std::vector<ObjectId> init = spec.initial.empty() ? draw_initial_state(space, spec.k, opt.seed, replica) : spec.initial;
  if (init.size() != spec.k) throw ConfigError("initial state size does not match k");
  res.initial_state = init;
  CacheState<ObjectId> state(init, space.size());
  policy->reset(state);
  Rng rng(opt.seed + replica);
  RequestSource::Cursor cursor(inst.source);

  RunRecord acc;
  acc.replica = replica;
  std::size_t next_cp = 0;
  std::vector<ObjectId> before(spec.k);
  const Cost cr{cm.retrieval()};
  for (std::uint64_t t = 1; t <= opt.horizon; ++t) {
    const ObjectId x = cursor.next(t, rng);
    std::copy(state.contents().begin(), state.contents().end(), before.begin());
    const Cost approx_before = service_cost(space, cm, x, std::span<const ObjectId>(before));
    const auto d = policy->on_request(x, state, t, rng);

    std::size_t changed = 0;
    for (std::size_t s = 0; s < before.size(); ++s) changed += before[s] != state[s];
    const Cost move = changed == 0   ? Cost::zero()
                      : changed == 1 ? cr
                                     : movement_cost<ObjectId>(before, state.contents(), cm);
    const Cost serve = service_cost(space, cm, x, state.contents());
    const Cost charge = d.charge(cm);
    if (!(move + serve == charge) || (changed != 0) != d.state_changed || !(serve == d.service_cost_paid))
      throw std::logic_error("accounting mismatch at request " + std::to_string(t) + " (" + policy->name() + ")");
    if (state.size() != spec.k) throw std::logic_error("cache size changed");

    acc.acc_cost += charge.value();
    acc.acc_approx_cost += approx_before.value();
    switch (d.outcome) {
      case Outcome::exact_hit: ++acc.exact_hits; break;
      case Outcome::approx_hit: ++acc.approx_hits; break;
      case Outcome::miss: ++acc.misses; break;
    }
    acc.state_changes += d.state_changed;

    if (next_cp < opt.checkpoints.size() && opt.checkpoints[next_cp] == t) {
      RunRecord r = acc;
      r.t = t;
      if (inst.track_inst_cost) {
        const PopularityField& rates = inst.source.is_sequence() ? *inst.known_rates : inst.source.rates_at(t);
        r.inst_cost = expected_cost(space, cm, rates, state.contents()).value();
      } else {
        r.inst_cost = std::numeric_limits<double>::quiet_NaN();
      }
      res.records.push_back(r);
      ++next_cp;
    }
  }
  res.final_state = state.sorted();
  if (auto* g = dynamic_cast<GreedyPolicy<S>*>(policy.get())) {
    res.stats["greedy_swaps"] = static_cast<double>(g->swaps());
    res.stats["greedy_cost_increases"] = static_cast<double>(g->cost_increases());
  }
  if (auto* du = dynamic_cast<DuelPolicy<S>*>(policy.get())) {
    res.stats["duels_open"] = static_cast<double>(du->duels().size());
    res.stats["duel_consistent"] = du->consistent(state) ? 1.0 : 0.0;
  }
  return res;
}

/// Worker count: `requested` if positive, else hardware concurrency, capped
/// by SIMCACHE_THREADS when set.
inline std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SIMCACHE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs `jobs` independent tasks on a worker pool; the first exception is rethrown.
inline void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = worker_count(threads, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < jobs;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

template <DiscreteSpace S>
std::vector<ReplicaResult> run(const Instance<S>& inst, const PolicySpec& spec, const RunOptions& opt) {
  if (opt.replicas == 0) throw ConfigError("replicas must be at least 1");
  for (auto t : opt.checkpoints)
    if (t < 1 || t > opt.horizon) throw ConfigError("checkpoint outside [1, horizon]");
  if (!std::is_sorted(opt.checkpoints.begin(), opt.checkpoints.end())) throw ConfigError("checkpoints must be sorted");
  std::vector<ReplicaResult> out(opt.replicas);
  parallel_for(opt.replicas, opt.threads, [&](std::size_t i) { out[i] = run_replica(inst, spec, opt, i); });
  return out;
}

// ---------------------------------------------------------------------------
// Reports.

inline void write_record(std::ostream& os, const RunRecord& r) {
  const double t = static_cast<double>(std::max<std::uint64_t>(r.t, 1));
  os << r.t << ',' << csv::format_double(r.inst_cost) << ',' << csv::format_double(r.acc_cost) << ','
     << csv::format_double(r.acc_approx_cost) << ',' << r.exact_hits << ',' << r.approx_hits << ',' << r.misses << ','
     << r.state_changes << ',' << r.replica << ',' << csv::format_double(r.acc_cost / t) << ','
     << csv::format_double(r.acc_approx_cost / t) << '\n';
}

inline void write_records(std::ostream& os, const std::vector<ReplicaResult>& results) {
  os << kRecordHeader << '\n';
  for (const auto& r : results)
    for (const auto& rec : r.records) write_record(os, rec);
}

struct SummaryRow {
  std::uint64_t t = 0;
  double inst_mean = 0.0, inst_se = 0.0;
  double avg_cost_mean = 0.0, avg_cost_se = 0.0;
};

/// Mean and standard error across replicas at every checkpoint.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicaResult>& results) {
  std::vector<SummaryRow> rows;
  if (results.empty()) return rows;
  const std::size_t n = results.size();
  for (std::size_t c = 0; c < results.front().records.size(); ++c) {
    SummaryRow row;
    row.t = results.front().records[c].t;
    double s1 = 0, s2 = 0, a1 = 0, a2 = 0;
    for (const auto& r : results) {
      if (r.records.size() <= c || r.records[c].t != row.t) throw std::logic_error("misaligned checkpoints");
      const double v = r.records[c].inst_cost, a = r.records[c].acc_cost / static_cast<double>(row.t);
      s1 += v;
      s2 += v * v;
      a1 += a;
      a2 += a * a;
    }
    row.inst_mean = s1 / n;
    row.avg_cost_mean = a1 / n;
    if (n > 1) {
      row.inst_se = std::sqrt(std::max(0.0, (s2 - n * row.inst_mean * row.inst_mean) / (n - 1.0)) / n);
      row.avg_cost_se = std::sqrt(std::max(0.0, (a2 - n * row.avg_cost_mean * row.avg_cost_mean) / (n - 1.0)) / n);
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "t,inst_cost_mean,inst_cost_se,avg_cost_mean,avg_cost_se\n";
  for (const auto& r : rows)
    os << r.t << ',' << csv::format_double(r.inst_mean) << ',' << csv::format_double(r.inst_se) << ','
       << csv::format_double(r.avg_cost_mean) << ',' << csv::format_double(r.avg_cost_se) << '\n';
}

/// Aligned table: one column per run, rows at the shared checkpoints.
/// `metric` is "inst_cost" or "avg_cost" (replica means).
inline void write_comparison(std::ostream& os, const std::vector<std::pair<std::string, std::vector<ReplicaResult>>>& runs,
                             const std::string& metric) {
  if (metric != "inst_cost" && metric != "avg_cost") throw ConfigError("unknown comparison metric '" + metric + "'");
  std::vector<std::vector<SummaryRow>> sums;
  for (const auto& [name, res] : runs) sums.push_back(summarize(res));
  for (const auto& s : sums) {
    if (s.size() != sums.front().size()) throw ConfigError("misaligned checkpoint schedules");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i].t != sums.front()[i].t) throw ConfigError("misaligned checkpoint schedules");
  }
  os << 't';
  for (const auto& [name, res] : runs) os << ',' << name;
  os << '\n';
  if (sums.empty()) return;
  for (std::size_t i = 0; i < sums.front().size(); ++i) {
    os << sums.front()[i].t;
    for (const auto& s : sums) os << ',' << csv::format_double(metric == "inst_cost" ? s[i].inst_mean : s[i].avg_cost_mean);
    os << '\n';
  }
}

}  // namespace simcache
