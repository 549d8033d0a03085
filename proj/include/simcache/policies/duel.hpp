#pragma once

#include "simcache/policies/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace simcache {

struct DuelParams {
  /// Counter separation that ends a duel.
  double delta = 1.0;
  /// Duel timeout, in requests.
  double tau = 100.0;
  /// Probability of matching a challenger with its closest free cached object.
  double beta = 0.75;

  void validate() const {
    if (!(delta > 0.0) || !(tau > 0.0)) throw std::invalid_argument("duel delta and tau must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("duel beta must be in [0, 1]");
  }
};

template <class Obj>
struct DuelSlot {
  Obj incumbent{};
  Obj challenger{};
  double counter_incumbent = 0.0;
  double counter_challenger = 0.0;
  std::uint64_t start_time = 0;
};

/// Duel: a request for an uncached object opens a duel between it (held only
/// as a reference) and a cached incumbent. Both accumulate the cost savings
/// they would bring on later requests; the challenger replaces the incumbent
/// once it leads by more than delta, and the incumbent stays on timeout.
template <ObjectSpace S>
class DuelPolicy final : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::object_type;
  using typename Base::State;
  using Slot = DuelSlot<object_type>;

  DuelPolicy(const S& space, const CostModel& cm, DuelParams params) : Base(space, cm), params_(params) {
    params_.validate();
    if (cm.chi().is_infinite()) throw std::invalid_argument("duel needs a finite chi");
    if constexpr (MetricSpace<S>) reach_ = space.radius_for(cm.chi().value());
  }

  std::string name() const override { return "duel"; }
  const DuelParams& params() const noexcept { return params_; }
  std::span<const Slot> duels() const noexcept { return duels_; }

  void reset(const State&) override { duels_.clear(); }

  Decision on_request(const object_type& x, State& state, std::uint64_t t, Rng& rng) override {
    feed(x, state);
    Decision d = resolve(x, state, t);
    admit(x, state, t, rng);
    return d;
  }

  /// Duel bookkeeping is consistent with the cache state.
  bool consistent(const State& state) const {
    if (duels_.size() > state.size()) return false;
    std::vector<object_type> inc;
    for (const auto& d : duels_) {
      if (!state.contains(d.incumbent) || state.contains(d.challenger)) return false;
      inc.push_back(d.incumbent);
    }
    std::sort(inc.begin(), inc.end());
    return std::adjacent_find(inc.begin(), inc.end()) == inc.end();
  }

 private:
  double cap(double c) const { return std::min(c, this->cm_.chi().value()); }

  /// C(x, S \ {y}) from the top two of x over S.
  double without(const TopTwo<object_type>& t, const object_type& y) const {
    return cap(t.best == y ? t.second : t.first);
  }

  void feed(const object_type& x, const State& state) {
    if (duels_.empty()) return;
    const auto t = top_two(*this->space_, x, state.contents());
    for (auto& d : duels_) {
      const double base = without(t, d.incumbent);
      const double gi = base - this->space_->raw(x, d.incumbent);
      const double gc = base - this->space_->raw(x, d.challenger);
      if (gi > 0.0) d.counter_incumbent += gi;
      if (gc > 0.0) d.counter_challenger += gc;
    }
  }

  /// Ends separated and timed-out duels; at most one challenger enters the
  /// cache per request, the others stay pending. Then serves x.
  Decision resolve(const object_type& x, State& state, std::uint64_t now) {
    std::size_t winner = duels_.size();
    for (std::size_t i = 0; i < duels_.size(); ++i) {
      const auto& d = duels_[i];
      const double lead = d.counter_challenger - d.counter_incumbent;
      if (!(lead > params_.delta)) continue;
      if (winner == duels_.size()) {
        winner = i;
        continue;
      }
      const auto& w = duels_[winner];
      const double wl = w.counter_challenger - w.counter_incumbent;
      if (lead > wl || (lead == wl && d.incumbent < w.incumbent)) winner = i;
    }
    std::optional<Slot> won;
    if (winner != duels_.size()) won = duels_[winner];
    std::vector<Slot> kept;
    kept.reserve(duels_.size());
    for (std::size_t i = 0; i < duels_.size(); ++i) {
      const auto& d = duels_[i];
      if (i == winner) continue;
      const double lead = d.counter_challenger - d.counter_incumbent;
      if (lead > params_.delta) {
        kept.push_back(d);
        continue;
      }
      if (-lead > params_.delta) continue;
      if (static_cast<double>(now - d.start_time) > params_.tau) continue;
      kept.push_back(d);
    }
    duels_ = std::move(kept);

    if (!won) return this->serve(x, state);
    const std::uint32_t slot = *state.slot_of(won->incumbent);
    state.replace(slot, won->challenger);
    Decision d = this->serve(x, state);
    d.state_changed = true;
    d.retrieval_performed = true;
    d.inserted = won->challenger;
    d.evicted = won->incumbent;
    return d;
  }

  void admit(const object_type& x, const State& state, std::uint64_t now, Rng& rng) {
    if (state.contains(x)) return;
    for (const auto& d : duels_)
      if (d.challenger == x) return;
    std::vector<std::uint32_t> free;
    for (std::uint32_t s = 0; s < state.size(); ++s) {
      bool engaged = false;
      for (const auto& d : duels_)
        if (d.incumbent == state[s]) engaged = true;
      if (!engaged) free.push_back(s);
    }
    if (free.empty()) return;
    std::uint32_t pick;
    if (Base::bernoulli(params_.beta, rng)) {
      pick = free.front();
      double best = this->space_->raw(x, state[pick]);
      for (std::uint32_t s : free) {
        const double c = this->space_->raw(x, state[s]);
        if (c < best || (c == best && state[s] < state[pick])) {
          best = c;
          pick = s;
        }
      }
    } else {
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    if (interferes(x, state[pick], state)) return;
    duels_.push_back(Slot{state[pick], x, 0.0, 0.0, now});
  }

  /// Would the new challenger's counter be fed by requests that already feed
  /// an ongoing challenger?
  bool interferes(const object_type& x, const object_type& incumbent, const State& state) const {
    if (duels_.empty()) return false;
    if constexpr (MetricSpace<S>) {
      const double rx = feeding_radius(x, incumbent, state);
      for (const auto& d : duels_) {
        if (this->space_->distance(x, d.challenger) < rx + feeding_radius(d.challenger, d.incumbent, state)) return true;
      }
      return false;
    } else {
      for (ObjectId z = 0; z < this->space_->size(); ++z) {
        const auto t = top_two(*this->space_, z, state.contents());
        if (!(without(t, incumbent) - this->space_->raw(z, x) > 0.0)) continue;
        for (const auto& d : duels_)
          if (without(t, d.incumbent) - this->space_->raw(z, d.challenger) > 0.0) return true;
      }
      return false;
    }
  }

  /// min(reach, distance from u to the closest cached object other than its incumbent).
  double feeding_radius(const object_type& u, const object_type& incumbent, const State& state) const
    requires MetricSpace<S>
  {
    double r = reach_;
    for (const auto& y : state.contents())
      if (!(y == incumbent)) r = std::min(r, static_cast<double>(this->space_->distance(u, y)));
    return r;
  }

  DuelParams params_;
  double reach_ = std::numeric_limits<double>::infinity();
  std::vector<Slot> duels_;
};

}  // namespace simcache
