#pragma once

#include "simcache/policies/policy.hpp"

namespace simcache {

/// Exact-caching LRU: only exact hits avoid a retrieval, every other request
/// is stored at the queue front and the tail is evicted.
template <ObjectSpace S>
class LruPolicy final : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::object_type;
  using typename Base::State;

  using Base::Base;

  std::string name() const override { return "lru"; }

  Decision on_request(const object_type& x, State& state, std::uint64_t, Rng&) override {
    if (auto slot = state.slot_of(x)) {
      state.move_to_front(*slot);
      return Base::exact_hit(x);
    }
    return this->store_front(x, state, Outcome::miss);
  }
};

/// Exact-caching Random: misses evict a uniformly chosen resident.
template <ObjectSpace S>
class RandomPolicy final : public Policy<S> {
  using Base = Policy<S>;

 public:
  using typename Base::Decision;
  using typename Base::object_type;
  using typename Base::State;

  using Base::Base;

  std::string name() const override { return "random"; }

  Decision on_request(const object_type& x, State& state, std::uint64_t, Rng& rng) override {
    if (state.contains(x)) return Base::exact_hit(x);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(state.size() - 1));
    return this->store(x, state, pick(rng), Outcome::miss);
  }
};

}  // namespace simcache
