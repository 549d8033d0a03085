#pragma once

#include "simcache/costs.hpp"
#include "simcache/errors.hpp"
#include "simcache/popularity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simcache {

// ---------------------------------------------------------------------------
// Offline dynamic schedule.

/// Which state changes the offline schedule may use on a request for x.
enum class TransitionModel {
  /// A change must insert x (x in S_{t+1} \ S_t); no prefetching.
  no_prefetch,
  /// Any single swap ending in a state that contains x, as the recurrence is
  /// written (T -> S with x in S).
  recurrence,
  /// Any single swap among the objects of the instance, then serve from the
  /// new state. A lower bound for policies that may store a previously
  /// requested object other than the current request.
  single_swap,
};

enum class OfflineAction { exact_hit, approximate, retrieve, store };

struct OfflineSolution {
  double total_cost = 0.0;
  /// S_1 .. S_{T+1}, each sorted.
  std::vector<std::vector<ObjectId>> states;
  std::vector<OfflineAction> actions;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

/// Colex ranking of k-subsets of {0..m-1} stored as bitmasks.
class SubsetIndex {
 public:
  SubsetIndex(std::size_t m, std::size_t k) : m_(m), k_(k), choose_(m + 1, std::vector<std::uint64_t>(k + 2, 0)) {
    for (std::size_t n = 0; n <= m; ++n) {
      choose_[n][0] = 1;
      for (std::size_t r = 1; r <= std::min(n, k + 1); ++r) choose_[n][r] = choose_[n - 1][r - 1] + choose_[n - 1][r];
    }
  }

  std::uint64_t count() const { return choose_[m_][k_]; }

  std::uint64_t rank(std::uint64_t mask) const {
    std::uint64_t r = 0;
    std::size_t i = 0;
    while (mask) {
      const int p = std::countr_zero(mask);
      r += choose_[static_cast<std::size_t>(p)][++i];
      mask &= mask - 1;
    }
    return r;
  }

  /// All k-subsets in rank order.
  std::vector<std::uint64_t> enumerate() const {
    std::vector<std::uint64_t> out;
    out.reserve(count());
    if (k_ == 0) {
      out.push_back(0);
      return out;
    }
    std::uint64_t v = (k_ == 64) ? ~0ULL : ((1ULL << k_) - 1);
    const std::uint64_t limit = m_ == 64 ? 0 : (1ULL << m_);
    while (true) {
      out.push_back(v);
      const std::uint64_t c = v & (~v + 1);
      const std::uint64_t r = v + c;
      if (r == 0) break;
      v = (((r ^ v) >> 2) / c) | r;
      if (limit && v >= limit) break;
    }
    return out;
  }

 private:
  std::size_t m_, k_;
  std::vector<std::vector<std::uint64_t>> choose_;
};

}  // namespace detail

/// Cost of a schedule: sum over t of C_m(S_t, S_{t+1}) + C(r_t, S_{t+1}).
template <DiscreteSpace S>
double schedule_cost(const S& space, const CostModel& cm, std::span<const ObjectId> requests,
                     const std::vector<std::vector<ObjectId>>& states) {
  if (states.size() != requests.size() + 1) throw std::invalid_argument("schedule length does not match requests");
  double total = 0.0;
  for (std::size_t t = 0; t < requests.size(); ++t) {
    const Cost move = movement_cost<ObjectId>(states[t], states[t + 1], cm);
    const Cost serve = service_cost(space, cm, requests[t], std::span<const ObjectId>(states[t + 1]));
    total += (move + serve).value();
  }
  return total;
}

/// Minimum-cost schedule for a known request sequence from initial state S_1,
/// over the k-subsets of the objects that appear in S_1 or the sequence.
template <DiscreteSpace S>
OfflineSolution dp_optimal(const S& space, const CostModel& cm, std::span<const ObjectId> requests,
                           std::span<const ObjectId> initial, TransitionModel model = TransitionModel::no_prefetch,
                           double max_entries = 1e8) {
  std::vector<ObjectId> universe(initial.begin(), initial.end());
  const std::size_t k = universe.size();
  if (k == 0) throw std::invalid_argument("empty initial state");
  std::sort(universe.begin(), universe.end());
  if (std::adjacent_find(universe.begin(), universe.end()) != universe.end())
    throw std::invalid_argument("initial state has duplicates");
  for (ObjectId r : requests) {
    if (r >= space.size()) throw std::out_of_range("request outside catalog");
    universe.push_back(r);
  }
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  const std::size_t m = universe.size();
  const std::size_t T = requests.size();
  if (m > 63) throw ScaleGuardError("offline instance has more than 63 distinct objects");
  const double states_count = detail::binomial(m, k);
  if (states_count * static_cast<double>(std::max<std::size_t>(T, 1)) > max_entries)
    throw ScaleGuardError("offline instance too large: C(" + std::to_string(m) + "," + std::to_string(k) + ") x " +
                          std::to_string(T) + " entries");

  auto local = [&](ObjectId x) {
    return static_cast<std::size_t>(std::lower_bound(universe.begin(), universe.end(), x) - universe.begin());
  };
  std::vector<double> cost(m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) cost[a * m + b] = space.raw(universe[a], universe[b]);
  const double chi = cm.chi().value();
  const double cr = cm.retrieval();

  detail::SubsetIndex index(m, k);
  const std::vector<std::uint64_t> masks = index.enumerate();
  const std::size_t N = masks.size();
  std::uint64_t start = 0;
  for (ObjectId y : initial) start |= 1ULL << local(y);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cur(N, inf), next(N);
  cur[index.rank(start)] = 0.0;
  std::vector<std::vector<std::uint32_t>> back(T, std::vector<std::uint32_t>(N));
  const std::uint64_t full = (m == 64) ? ~0ULL : ((1ULL << m) - 1);

  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t x = local(requests[t]);
    const std::uint64_t xbit = 1ULL << x;
    auto& bp = back[t];
    for (std::size_t j = 0; j < N; ++j) {
      const std::uint64_t s = masks[j];
      double svc = 0.0;
      if (!(s & xbit)) {
        svc = inf;
        for (std::uint64_t w = s; w; w &= w - 1) svc = std::min(svc, cost[x * m + std::countr_zero(w)]);
        svc = std::min(svc, chi);
      }
      double best = cur[j] + svc;
      std::uint32_t arg = static_cast<std::uint32_t>(j);
      auto consider = [&](std::uint64_t pred) {
        const std::uint64_t r = index.rank(pred);
        const double c = cur[r] + (cr + svc);
        if (c < best) {
          best = c;
          arg = static_cast<std::uint32_t>(r);
        }
      };
      const bool has_x = (s & xbit) != 0;
      if (model == TransitionModel::no_prefetch) {
        if (has_x)
          for (std::uint64_t out = full & ~s; out; out &= out - 1) consider((s & ~xbit) | (out & (~out + 1)));
      } else if (has_x || model == TransitionModel::single_swap) {
        for (std::uint64_t in = s; in; in &= in - 1) {
          const std::uint64_t a = in & (~in + 1);
          for (std::uint64_t out = full & ~s; out; out &= out - 1) consider((s & ~a) | (out & (~out + 1)));
        }
      }
      next[j] = best;
      bp[j] = arg;
    }
    std::swap(cur, next);
  }

  std::size_t end = 0;
  for (std::size_t j = 1; j < N; ++j)
    if (cur[j] < cur[end]) end = j;

  OfflineSolution sol;
  sol.total_cost = cur[end];
  std::vector<std::uint64_t> path(T + 1);
  std::size_t j = end;
  path[T] = masks[j];
  for (std::size_t t = T; t-- > 0;) {
    j = back[t][j];
    path[t] = masks[j];
  }
  auto to_state = [&](std::uint64_t mask) {
    std::vector<ObjectId> st;
    for (std::uint64_t w = mask; w; w &= w - 1) st.push_back(universe[std::countr_zero(w)]);
    return st;
  };
  for (std::uint64_t p : path) sol.states.push_back(to_state(p));
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t x = local(requests[t]);
    if (path[t] != path[t + 1]) sol.actions.push_back(OfflineAction::store);
    else if (path[t] & (1ULL << x)) sol.actions.push_back(OfflineAction::exact_hit);
    else if (approx_cost(space, requests[t], std::span<const ObjectId>(sol.states[t])) <= cm.chi())
      sol.actions.push_back(OfflineAction::approximate);
    else sol.actions.push_back(OfflineAction::retrieve);
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Static allocation.

struct StaticSolution {
  std::vector<ObjectId> state;
  double cost = 0.0;
};

namespace detail {

inline PopularityField counts_of(std::size_t catalog, std::span<const ObjectId> requests) {
  std::vector<PopularityField::Entry> e;
  e.reserve(requests.size());
  for (ObjectId r : requests) e.emplace_back(r, 1.0);
  return PopularityField::sparse(catalog, std::move(e));
}

}  // namespace detail

/// Exhaustive minimizer of sum_x w_x C(x, S) over k-subsets of the catalog.
/// Ties go to the lexicographically smallest sorted state.
template <DiscreteSpace S>
StaticSolution static_brute_force(const S& space, const CostModel& cm, const PopularityField& weights, std::size_t k,
                                  double max_subsets = 1e7) {
  const std::size_t n = space.size();
  if (k == 0 || k > n) throw std::invalid_argument("need 0 < k <= catalog size");
  if (weights.catalog_size() != n) throw std::invalid_argument("weights do not match catalog");
  if (detail::binomial(n, k) > max_subsets)
    throw ScaleGuardError("static brute force over C(" + std::to_string(n) + "," + std::to_string(k) + ") subsets");
  std::vector<std::pair<ObjectId, double>> support;
  weights.for_each([&](ObjectId x, double w) { support.emplace_back(x, w); });
  const double chi = cm.chi().value();

  std::vector<ObjectId> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = static_cast<ObjectId>(i);
  StaticSolution best{comb, std::numeric_limits<double>::infinity()};
  while (true) {
    double c = 0.0;
    for (const auto& [x, w] : support) {
      double a = chi;
      for (ObjectId y : comb) a = std::min(a, space.raw(x, y));
      c += w * a;
    }
    if (c < best.cost) best = {comb, c};
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  return best;
}

template <DiscreteSpace S>
StaticSolution static_brute_force(const S& space, const CostModel& cm, std::span<const ObjectId> requests, std::size_t k,
                                  double max_subsets = 1e7) {
  return static_brute_force(space, cm, detail::counts_of(space.size(), requests), k, max_subsets);
}

/// Adds, k times, the object with the largest cost reduction (smallest id on ties).
template <DiscreteSpace S>
StaticSolution static_greedy(const S& space, const CostModel& cm, const PopularityField& weights, std::size_t k) {
  const std::size_t n = space.size();
  if (k == 0 || k > n) throw std::invalid_argument("need 0 < k <= catalog size");
  if (weights.catalog_size() != n) throw std::invalid_argument("weights do not match catalog");
  std::vector<std::pair<ObjectId, double>> support;
  weights.for_each([&](ObjectId x, double w) { support.emplace_back(x, w); });
  std::vector<double> current(support.size(), cm.chi().value());
  std::vector<char> chosen(n, 0);
  StaticSolution sol;
  for (std::size_t step = 0; step < k; ++step) {
    ObjectId pick = 0;
    double best_gain = -1.0;
    for (ObjectId y = 0; y < n; ++y) {
      if (chosen[y]) continue;
      double gain = 0.0;
      for (std::size_t i = 0; i < support.size(); ++i) {
        const double a = space.raw(support[i].first, y);
        if (a < current[i]) gain += support[i].second * (current[i] - a);
      }
      if (gain > best_gain) {
        best_gain = gain;
        pick = y;
      }
    }
    chosen[pick] = 1;
    sol.state.push_back(pick);
    for (std::size_t i = 0; i < support.size(); ++i) current[i] = std::min(current[i], space.raw(support[i].first, pick));
  }
  for (std::size_t i = 0; i < support.size(); ++i) sol.cost += support[i].second * current[i];
  std::sort(sol.state.begin(), sol.state.end());
  return sol;
}

template <DiscreteSpace S>
StaticSolution static_greedy(const S& space, const CostModel& cm, std::span<const ObjectId> requests, std::size_t k) {
  return static_greedy(space, cm, detail::counts_of(space.size(), requests), k);
}

}  // namespace simcache
