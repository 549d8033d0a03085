#pragma once

#include "simcache/cache_state.hpp"
#include "simcache/costs.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>

namespace simcache {

using Rng = std::mt19937_64;

enum class Outcome { exact_hit, approx_hit, miss };

/// What a policy did with one request. `service_cost_paid` is C(r_t, S_{t+1}),
/// the cost of serving the request from the state after any change, so the
/// per-request charge is movement + service.
template <class Obj>
struct PolicyDecision {
  Obj served_object{};
  Cost service_cost_paid;
  bool retrieval_performed = false;
  bool state_changed = false;
  std::optional<Obj> inserted;
  std::optional<Obj> evicted;
  Outcome outcome = Outcome::exact_hit;

  Cost charge(const CostModel& cm) const {
    return (state_changed ? Cost{cm.retrieval()} : Cost::zero()) + service_cost_paid;
  }
};

/// Common interface for every online policy. A policy mutates the cache state
/// it is handed and reports the decision; it owns any auxiliary bookkeeping.
template <ObjectSpace S>
class Policy {
 public:
  using object_type = typename S::object_type;
  using State = CacheState<object_type>;
  using Decision = PolicyDecision<object_type>;

  Policy(const S& space, const CostModel& cm) : space_(&space), cm_(cm) {}
  virtual ~Policy() = default;

  virtual std::string name() const = 0;

  /// Called with the initial state before the first request.
  virtual void reset(const State&) {}

  /// `t` is the 1-based request index.
  virtual Decision on_request(const object_type& x, State& state, std::uint64_t t, Rng& rng) = 0;

  const S& space() const noexcept { return *space_; }
  const CostModel& cost_model() const noexcept { return cm_; }

 protected:
  /// Serve x from the unchanged state: the best approximator when its cost
  /// does not exceed chi, otherwise a retrieval without storing.
  Decision serve(const object_type& x, const State& state) const {
    if (state.contains(x)) return exact_hit(x);
    auto t = top_two(*space_, x, state.contents());
    return serve_with(x, t.best, t.first);
  }

  Decision serve_with(const object_type& x, const object_type& best, double cost) const {
    Decision d;
    const Cost c{cost};
    if (c == Cost::zero() && best == x) return exact_hit(x);
    if (c > cm_.chi() || c.is_infinite()) {
      d.served_object = x;
      d.service_cost_paid = cm_.chi();
      d.retrieval_performed = true;
      d.outcome = Outcome::miss;
    } else {
      d.served_object = best;
      d.service_cost_paid = c;
      d.outcome = Outcome::approx_hit;
    }
    return d;
  }

  static Decision exact_hit(const object_type& x) {
    Decision d;
    d.served_object = x;
    d.service_cost_paid = Cost::zero();
    d.outcome = Outcome::exact_hit;
    return d;
  }

  /// Retrieve x and store it in `slot`; x is then served at zero cost.
  Decision store(const object_type& x, State& state, std::uint32_t slot, Outcome outcome) const {
    Decision d;
    d.evicted = state[slot];
    state.replace(slot, x);
    d.inserted = x;
    d.served_object = x;
    d.service_cost_paid = Cost::zero();
    d.retrieval_performed = true;
    d.state_changed = true;
    d.outcome = outcome;
    return d;
  }

  /// Retrieve x, put it at the queue front and evict the queue tail.
  Decision store_front(const object_type& x, State& state, Outcome outcome) const {
    const std::uint32_t slot = state.back_slot();
    Decision d = store(x, state, slot, outcome);
    state.move_to_front(slot);
    return d;
  }

  static bool bernoulli(double p, Rng& rng) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  }

  const S* space_;
  CostModel cm_;
};

}  // namespace simcache
