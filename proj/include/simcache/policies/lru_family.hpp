#pragma once

#include "simcache/policies/policy.hpp"

#include <algorithm>
#include <stdexcept>

namespace simcache {

namespace detail {

/// Best approximator of x in the state (x itself when cached) together with
/// C_a(x, z) and C(x, S \ {z}).
template <ObjectSpace S>
struct Nearest {
  typename S::object_type z{};
  double approx = 0.0;
  double without = 0.0;
};

template <ObjectSpace S>
Nearest<S> nearest(const S& space, const CostModel& cm, const typename S::object_type& x,
                   const CacheState<typename S::object_type>& state) {
  auto t = top_two(space, x, state.contents());
  Nearest<S> n;
  if (state.contains(x)) {
    n.z = x;
    n.approx = 0.0;
    n.without = t.best == x ? t.second : t.first;
  } else {
    n.z = t.best;
    n.approx = t.first;
    n.without = t.second;
  }
  n.without = cm.cap(Cost{n.without}).value();
  return n;
}

inline void check_q(double q) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("insertion probability q must be in (0, 1]");
}

}  // namespace detail

/// qLRU with cost-aware refresh: approximate hits refresh the serving object
/// in proportion to the cost it saves, and insert the request in proportion
/// to the approximation cost paid.
template <ObjectSpace S>
class QlruDcPolicy final : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::object_type;
  using typename Base::State;

  QlruDcPolicy(const S& space, const CostModel& cm, double q) : Base(space, cm), q_(q) { detail::check_q(q); }

  std::string name() const override { return "qlru_dc"; }
  double q() const noexcept { return q_; }

  Decision on_request(const object_type& x, State& state, std::uint64_t, Rng& rng) override {
    const auto n = detail::nearest(*this->space_, this->cm_, x, state);
    const double cr = this->cm_.retrieval();
    const Cost ca{n.approx};
    if (ca > this->cm_.chi() || ca.is_infinite()) {
      if (this->cm_.chi().is_infinite() || Base::bernoulli(q_, rng)) return this->store_front(x, state, Outcome::miss);
      return this->serve_with(x, n.z, n.approx);
    }
    const bool refresh = Base::bernoulli((n.without - n.approx) / cr, rng);
    const bool insert = Base::bernoulli(q_ * n.approx / cr, rng);
    if (refresh) state.move_to_front(*state.slot_of(n.z));
    if (insert) return this->store_front(x, state, Outcome::miss);
    if (n.z == x) return Base::exact_hit(x);
    return this->serve_with(x, n.z, n.approx);
  }

 private:
  double q_;
};

/// LRU whose miss probability grows with the approximation cost; otherwise
/// the best approximator is served and refreshed.
template <ObjectSpace S>
class RndLruPolicy final : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::object_type;
  using typename Base::State;

  RndLruPolicy(const S& space, const CostModel& cm, double q) : Base(space, cm), q_(q) { detail::check_q(q); }

  std::string name() const override { return "rnd_lru"; }
  double q() const noexcept { return q_; }

  Decision on_request(const object_type& x, State& state, std::uint64_t, Rng& rng) override {
    const auto n = detail::nearest(*this->space_, this->cm_, x, state);
    const Cost ca{n.approx};
    const bool forced = ca > this->cm_.chi() || ca.is_infinite();
    const double p_miss = forced ? 1.0 : std::min(1.0, q_ * n.approx / this->cm_.retrieval());
    if (Base::bernoulli(p_miss, rng)) return this->store_front(x, state, Outcome::miss);
    state.move_to_front(*state.slot_of(n.z));
    if (n.z == x) return Base::exact_hit(x);
    return this->serve_with(x, n.z, n.approx);
  }

 private:
  double q_;
};

}  // namespace simcache
