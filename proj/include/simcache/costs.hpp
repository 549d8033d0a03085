#pragma once

#include "simcache/cache_state.hpp"
#include "simcache/cost.hpp"
#include "simcache/popularity.hpp"
#include "simcache/space.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace simcache {

// Cost functions of the similarity-caching model: approximation, service,
// movement and excursion costs, best approximators and the expected cost of a
// cache state under independent requests.

template <ObjectSpace S>
struct Approximator {
  typename S::object_type object{};
  Cost cost;
};

/// Best and runner-up approximation costs of one request over a cache state.
/// `second` is the best cost over S \ {best} (infinite when |S| = 1).
template <class Obj>
struct TopTwo {
  Obj best{};
  double first = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
};

template <ObjectSpace S>
TopTwo<typename S::object_type> top_two(const S& space, const typename S::object_type& x,
                                        std::span<const typename S::object_type> cache) {
  TopTwo<typename S::object_type> t;
  bool have = false;
  for (const auto& y : cache) {
    double c = space.raw(x, y);
    if (!have || c < t.first || (c == t.first && y < t.best)) {
      if (have) t.second = std::min(t.second, t.first);
      t.first = c;
      t.best = y;
      have = true;
    } else {
      t.second = std::min(t.second, c);
    }
  }
  if (!have) throw std::invalid_argument("empty cache state");
  return t;
}

/// C_a(x, S): the best approximation cost over the cache contents.
template <ObjectSpace S>
Cost approx_cost(const S& space, const typename S::object_type& x, std::span<const typename S::object_type> cache) {
  return Cost{top_two(space, x, cache).first};
}

/// Minimizer of C_a(x, .) over the cache; ties go to the smallest object id.
template <ObjectSpace S>
Approximator<S> best_approximator(const S& space, const typename S::object_type& x,
                                  std::span<const typename S::object_type> cache) {
  auto t = top_two(space, x, cache);
  return {t.best, Cost{t.first}};
}

/// min(C_a(x, S), chi).
template <ObjectSpace S>
Cost service_cost(const S& space, const CostModel& cm, const typename S::object_type& x,
                  std::span<const typename S::object_type> cache) {
  return cm.cap(approx_cost(space, x, cache));
}

/// Cost of moving the cache from `from` to `to`: 0, one retrieval, or infinite.
template <class Obj>
Cost movement_cost(std::span<const Obj> from, std::span<const Obj> to, const CostModel& cm) {
  std::vector<Obj> a(from.begin(), from.end()), b(to.begin(), to.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<Obj> added;
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(added));
  if (added.empty() && a.size() == b.size()) return Cost::zero();
  if (added.size() == 1) return Cost{cm.retrieval()};
  return Cost::infinite();
}

/// Excursion of a server at y to serve x: min(C_a(x, y), chi).
template <ObjectSpace S>
Cost excursion_cost(const S& space, const CostModel& cm, const typename S::object_type& x,
                    const typename S::object_type& y) {
  return cm.cap(space.approx_cost(x, y));
}

// ---------------------------------------------------------------------------
// Expected cost, discrete catalogs.

namespace detail {

/// Hop distance from every grid point to its nearest cached point.
inline std::vector<int> grid_nearest_hops(const TorusGrid& grid, std::span<const ObjectId> cache) {
  std::vector<int> dist(grid.size(), -1);
  std::vector<ObjectId> frontier;
  frontier.reserve(grid.size());
  for (ObjectId y : cache) {
    if (dist[y] < 0) {
      dist[y] = 0;
      frontier.push_back(y);
    }
  }
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    ObjectId z = frontier[head];
    GridPoint p = grid.point(z);
    const ObjectId nbrs[4] = {grid.id(p.row + 1, p.col), grid.id(p.row - 1, p.col), grid.id(p.row, p.col + 1),
                              grid.id(p.row, p.col - 1)};
    for (ObjectId n : nbrs) {
      if (dist[n] < 0) {
        dist[n] = dist[z] + 1;
        frontier.push_back(n);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Sum over x of lambda_x * min(C_a(x, S), chi).
template <DiscreteSpace S>
Cost expected_cost(const S& space, const CostModel& cm, const PopularityField& rates, std::span<const ObjectId> cache) {
  if (cache.empty()) throw std::invalid_argument("empty cache state");
  if (rates.catalog_size() != space.size()) throw std::invalid_argument("popularity field does not match catalog");
  Cost total;
  if constexpr (std::is_same_v<S, TorusGrid>) {
    auto hops = detail::grid_nearest_hops(space, cache);
    rates.for_each([&](ObjectId x, double r) { total += r * cm.cap(Cost{space.cost_at(hops[x])}); });
  } else {
    rates.for_each([&](ObjectId x, double r) { total += r * service_cost(space, cm, x, cache); });
  }
  return total;
}

template <DiscreteSpace S>
Cost expected_cost(const S& space, const CostModel& cm, const PopularityField& rates, const CacheState<ObjectId>& state) {
  return expected_cost(space, cm, rates, state.contents());
}

/// C(S u {insert} \ {evict}) - C(S) by two full evaluations.
template <DiscreteSpace S>
double delta_cost_full(const S& space, const CostModel& cm, const PopularityField& rates, std::span<const ObjectId> cache,
                       ObjectId insert, ObjectId evict) {
  if (std::find(cache.begin(), cache.end(), insert) != cache.end()) throw std::invalid_argument("inserted object already cached");
  auto it = std::find(cache.begin(), cache.end(), evict);
  if (it == cache.end()) throw std::invalid_argument("evicted object not cached");
  std::vector<ObjectId> next(cache.begin(), cache.end());
  next[static_cast<std::size_t>(it - cache.begin())] = insert;
  return expected_cost(space, cm, rates, std::span<const ObjectId>(next)) - expected_cost(space, cm, rates, cache);
}

// ---------------------------------------------------------------------------
// Expected cost, continuous box (Monte Carlo).

/// Request density over a continuous box: homogeneous, or a Gaussian bump
/// truncated to the box. `total_rate` is the integral of the density.
struct ContinuousDensity {
  enum class Kind { uniform, gaussian } kind = Kind::uniform;
  double total_rate = 1.0;
  Point center;
  double sigma = 1.0;

  template <class Rng>
  Point sample(const ContinuousSpace& space, Rng& rng) const {
    Point p(space.dim());
    if (kind == Kind::uniform) {
      std::uniform_real_distribution<double> u(0.0, space.extent());
      for (auto& v : p) v = u(rng);
      return p;
    }
    std::normal_distribution<double> n(0.0, sigma);
    for (;;) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = center[i] + n(rng);
      if (space.contains(p)) return p;
    }
  }
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of the integral of lambda(x) C(x, S) over the box.
/// The service cost must be finite (finite chi) for the estimate to exist.
template <class Rng>
MonteCarloEstimate expected_cost(const ContinuousSpace& space, const CostModel& cm, const ContinuousDensity& density,
                                 std::span<const Point> cache, Rng& rng, std::size_t samples = 100000) {
  if (cache.empty()) throw std::invalid_argument("empty cache state");
  if (samples < 2) throw std::invalid_argument("need at least two samples");
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Point x = density.sample(space, rng);
    Cost c = service_cost(space, cm, x, cache);
    if (c.is_infinite()) throw std::domain_error("infinite service cost in Monte Carlo estimate");
    double v = density.total_rate * c.value();
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), samples};
}

}  // namespace simcache
