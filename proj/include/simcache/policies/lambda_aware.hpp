#pragma once

#include "simcache/policies/policy.hpp"
#include "simcache/popularity.hpp"
#include "simcache/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace simcache {

namespace detail {

/// Slot with the smallest delta; equal deltas go to the smallest cached id.
inline std::uint32_t argmin_delta(std::span<const double> deltas, std::span<const ObjectId> slots, double tol) {
  std::uint32_t best = 0;
  for (std::uint32_t s = 1; s < deltas.size(); ++s) {
    if (deltas[s] < deltas[best] - tol || (std::abs(deltas[s] - deltas[best]) <= tol && slots[s] < slots[best])) best = s;
  }
  return best;
}

}  // namespace detail

/// Shared part of the rate-aware policies: an incremental expected-cost
/// tracker mirroring the cache slots.
template <DiscreteSpace S>
class RateAwarePolicy : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::State;

  RateAwarePolicy(const S& space, const CostModel& cm, PopularityField rates) : Base(space, cm), rates_(std::move(rates)) {
    if (cm.chi().is_infinite()) throw std::invalid_argument("rate-aware policies need a finite chi");
  }

  void reset(const State& state) override { tracker_.emplace(*this->space_, this->cm_, rates_, state.contents()); }

  const IncrementalCost<S>& tracker() const { return *tracker_; }
  const PopularityField& rates() const noexcept { return rates_; }

 protected:
  IncrementalCost<S>& ensure(const State& state) {
    if (!tracker_) reset(state);
    return *tracker_;
  }

  double tolerance() const { return 1e-12 * std::max(1.0, std::abs(tracker_->total())); }

  Decision serve_tracked(ObjectId x, const State& state) const {
    if (auto b = tracker_->best_of(x)) return this->serve_with(x, state[b->first], b->second);
    return this->serve(x, state);
  }

  Decision swap_in(ObjectId x, State& state, std::uint32_t slot) {
    Decision d = this->store(x, state, slot, Outcome::miss);
    tracker_->apply_swap(slot, x);
    return d;
  }

  PopularityField rates_;
  std::optional<IncrementalCost<S>> tracker_;
  std::vector<double> deltas_;
};

/// Greedy: store x whenever some single swap lowers the expected cost, evicting
/// the object whose replacement lowers it most.
template <DiscreteSpace S>
class GreedyPolicy final : public RateAwarePolicy<S> {
  using Base = RateAwarePolicy<S>;

 public:
  using typename Base::Decision;
  using typename Base::State;

  using Base::Base;

  std::string name() const override { return "greedy"; }

  void reset(const State& state) override {
    Base::reset(state);
    last_cost_ = this->tracker_->total();
  }

  Decision on_request(const ObjectId& x, State& state, std::uint64_t, Rng&) override {
    auto& tr = this->ensure(state);
    if (state.contains(x)) return Policy<S>::exact_hit(x);
    tr.evaluate_insert(x, this->deltas_);
    const double tol = this->tolerance();
    const std::uint32_t slot = detail::argmin_delta(this->deltas_, state.contents(), tol);
    if (!(this->deltas_[slot] < -tol)) return this->serve_tracked(x, state);
    Decision d = this->swap_in(x, state, slot);
    const double now = tr.total();
    if (now > last_cost_ + tol) ++increases_;
    last_cost_ = now;
    ++swaps_;
    return d;
  }

  /// Accepted swaps after which the tracked expected cost went up.
  std::size_t cost_increases() const noexcept { return increases_; }
  std::size_t swaps() const noexcept { return swaps_; }

 private:
  double last_cost_ = 0.0;
  std::size_t increases_ = 0;
  std::size_t swaps_ = 0;
};

struct TemperatureSchedule {
  enum class Kind { logarithmic, power, fixed } kind = Kind::power;
  /// power: T(t) = scale * t^-exponent.
  double scale = 1.0;
  double exponent = 0.5;
  /// fixed: T(t) = fixed.
  double fixed = 1.0;
  /// logarithmic: T(t) = delta_max * k / (1 + log t); estimated when <= 0.
  double delta_max = 0.0;

  double at(std::uint64_t t, std::size_t k) const {
    const double tt = static_cast<double>(std::max<std::uint64_t>(t, 1));
    switch (kind) {
      case Kind::power: return scale * std::pow(tt, -exponent);
      case Kind::fixed: return fixed;
      case Kind::logarithmic: return delta_max * static_cast<double>(k) / (1.0 + std::log(tt));
    }
    return fixed;
  }
};

/// Largest |delta C| seen over random single-swap neighbours: `states` random
/// k-subsets with `per_state` random swaps each.
template <DiscreteSpace S>
double estimate_delta_max(const S& space, const CostModel& cm, const PopularityField& rates, std::size_t k, Rng& rng,
                          std::size_t states = 100, std::size_t per_state = 100) {
  const std::size_t n = space.size();
  if (k == 0 || k >= n) throw std::invalid_argument("need 0 < k < catalog size");
  std::vector<ObjectId> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<ObjectId>(i);
  std::uniform_int_distribution<std::size_t> pick_obj(0, n - 1);
  std::uniform_int_distribution<std::uint32_t> pick_slot(0, static_cast<std::uint32_t>(k - 1));
  double best = 0.0;
  std::vector<double> deltas;
  for (std::size_t s = 0; s < states; ++s) {
    std::vector<ObjectId> cache;
    std::sample(all.begin(), all.end(), std::back_inserter(cache), k, rng);
    IncrementalCost<S> tr(space, cm, rates, cache);
    for (std::size_t i = 0; i < per_state; ++i) {
      ObjectId x;
      do x = static_cast<ObjectId>(pick_obj(rng));
      while (std::find(cache.begin(), cache.end(), x) != cache.end());
      tr.evaluate_insert(x, deltas);
      best = std::max(best, std::abs(deltas[pick_slot(rng)]));
    }
  }
  return best;
}

/// Simulated-annealing policy: propose replacing a random cached object with
/// the request and accept with the Metropolis rule at temperature T(t).
template <DiscreteSpace S>
class OsaPolicy final : public RateAwarePolicy<S> {
  using Base = RateAwarePolicy<S>;

 public:
  using typename Base::Decision;
  using typename Base::State;

  enum class Eviction { uniform, weighted };

  OsaPolicy(const S& space, const CostModel& cm, PopularityField rates, TemperatureSchedule schedule,
            Eviction eviction = Eviction::uniform)
      : Base(space, cm, std::move(rates)), schedule_(schedule), eviction_(eviction) {}

  std::string name() const override { return "osa"; }
  const TemperatureSchedule& schedule() const noexcept { return schedule_; }

  Decision on_request(const ObjectId& x, State& state, std::uint64_t t, Rng& rng) override {
    auto& tr = this->ensure(state);
    if (schedule_.kind == TemperatureSchedule::Kind::logarithmic && !(schedule_.delta_max > 0.0)) {
      Rng aux(0x05a5eedULL);
      schedule_.delta_max = estimate_delta_max(*this->space_, this->cm_, this->rates_, state.size(), aux);
    }
    if (state.contains(x)) return Policy<S>::exact_hit(x);
    const std::uint32_t slot = pick_slot(tr, state.size(), rng);
    tr.evaluate_insert(x, this->deltas_);
    const double delta = this->deltas_[slot];
    bool accept = delta <= this->tolerance();
    if (!accept) {
      const double temp = schedule_.at(t, state.size());
      accept = temp > 0.0 && Policy<S>::bernoulli(std::exp(-delta / temp), rng);
    }
    if (accept) return this->swap_in(x, state, slot);
    return this->serve_tracked(x, state);
  }

 private:
  std::uint32_t pick_slot(const IncrementalCost<S>& tr, std::size_t k, Rng& rng) {
    if (eviction_ == Eviction::uniform)
      return std::uniform_int_distribution<std::uint32_t>(0, static_cast<std::uint32_t>(k - 1))(rng);
    weights_.resize(k);
    for (std::uint32_t s = 0; s < k; ++s) weights_[s] = 1.0 / (1e-9 + std::max(0.0, tr.removal_loss(s)));
    std::discrete_distribution<std::uint32_t> d(weights_.begin(), weights_.end());
    return d(rng);
  }

  TemperatureSchedule schedule_;
  Eviction eviction_;
  std::vector<double> weights_;
};

}  // namespace simcache
