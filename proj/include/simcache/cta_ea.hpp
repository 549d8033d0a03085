#pragma once

#include "simcache/costs.hpp"
#include "simcache/errors.hpp"
#include "simcache/popularity.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace simcache {

// Characteristic-time and exponentialization model of qLRU-dC on a small
// catalog: the cache is a TTL cache whose timer T_c is fixed by the expected
// occupancy, and its contents evolve as a continuous-time Markov chain over
// subsets with insertion rate q lambda_x C(x, S) / C_r and removal rate
// nu_x(S) = a / (exp(a T_c) - 1), a = (C(S \ {x}) - C(S)) / C_r.

struct CtaEaResult {
  double q = 0.0;
  double tc = 0.0;
  std::size_t slack = 3;
  /// Subsets of the catalog as bitmasks, with their stationary probability.
  std::vector<std::uint64_t> states;
  std::vector<double> pi;
  /// Per-object probability of being cached.
  std::vector<double> occupancy;
  double expected_size = 0.0;
  int iterations = 0;

  double mass(const std::function<bool(std::uint64_t)>& pred) const {
    double m = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
      if (pred(states[i])) m += pi[i];
    return m;
  }
};

namespace detail {

template <DiscreteSpace S>
double subset_cost(const S& space, const CostModel& cm, const std::vector<double>& rates, std::uint64_t mask) {
  const double chi = cm.chi().value();
  double c = 0.0;
  for (std::size_t x = 0; x < rates.size(); ++x) {
    if (rates[x] <= 0.0) continue;
    double a = chi;
    for (std::uint64_t w = mask; w; w &= w - 1) a = std::min(a, space.raw(static_cast<ObjectId>(x), static_cast<ObjectId>(std::countr_zero(w))));
    c += rates[x] * a;
  }
  return c;
}

/// 1 / E[T_S] for marginal gain `a` (in units of C_r) and timer `tc`.
inline double removal_rate(double a, double tc) {
  if (std::abs(a * tc) < 1e-12) return 1.0 / tc;
  return a / std::expm1(a * tc);
}

}  // namespace detail

/// True when no single replacement lowers the expected cost of `mask`.
template <DiscreteSpace S>
bool locally_optimal(const S& space, const CostModel& cm, const PopularityField& rates, std::uint64_t mask,
                     double tol = 1e-12) {
  const auto r = rates.to_dense();
  const double base = detail::subset_cost(space, cm, r, mask);
  const std::size_t n = space.size();
  for (std::uint64_t in = mask; in; in &= in - 1) {
    const std::uint64_t a = in & (~in + 1);
    for (std::size_t b = 0; b < n; ++b) {
      if (mask & (1ULL << b)) continue;
      if (detail::subset_cost(space, cm, r, (mask & ~a) | (1ULL << b)) < base - tol * std::max(1.0, base)) return false;
    }
  }
  return true;
}

/// Solves the chain for T_c such that sum_x pi_x = k. States are all subsets
/// with at most k + slack objects.
template <DiscreteSpace S>
CtaEaResult cta_ea_solve(const S& space, const CostModel& cm, const PopularityField& rates, std::size_t k, double q,
                         std::size_t slack = 3) {
  const std::size_t n = space.size();
  if (n == 0 || n > 12) throw ScaleGuardError("CTA/EA exact solve needs 1 <= |X| <= 12");
  if (k == 0 || k > n) throw std::invalid_argument("need 0 < k <= catalog size");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must be in (0, 1]");
  if (cm.chi().is_infinite()) throw std::invalid_argument("CTA/EA needs a finite chi");
  const auto r = rates.to_dense();
  const double cr = cm.retrieval();
  const std::size_t cap = std::min(n, k + slack);

  CtaEaResult res;
  res.q = q;
  res.slack = slack;
  std::vector<int> index(std::size_t{1} << n, -1);
  std::vector<double> cost;
  for (std::uint64_t m = 0; m < (1ULL << n); ++m) {
    if (static_cast<std::size_t>(std::popcount(m)) > cap) continue;
    index[m] = static_cast<int>(res.states.size());
    res.states.push_back(m);
    cost.push_back(detail::subset_cost(space, cm, r, m));
  }
  const std::size_t N = res.states.size();

  // Insertion rates do not depend on T_c.
  struct Edge {
    int from, to;
    double gain;  // removal: marginal gain / C_r; insertion: rate
    bool removal;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < N; ++i) {
    const std::uint64_t m = res.states[i];
    for (std::size_t x = 0; x < n; ++x) {
      const std::uint64_t bit = 1ULL << x;
      if (m & bit) {
        edges.push_back({static_cast<int>(i), index[m & ~bit], (cost[index[m & ~bit]] - cost[i]) / cr, true});
      } else if (static_cast<std::size_t>(std::popcount(m)) < cap && r[x] > 0.0) {
        double svc = cm.chi().value();
        for (std::uint64_t w = m; w; w &= w - 1) svc = std::min(svc, space.raw(static_cast<ObjectId>(x), static_cast<ObjectId>(std::countr_zero(w))));
        const double rate = q * r[x] * svc / cr;
        if (rate > 0.0) edges.push_back({static_cast<int>(i), index[m | bit], rate, false});
      }
    }
  }

  auto stationary = [&](double tc) {
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> out(N, 0.0);
    for (const auto& e : edges) {
      const double rate = e.removal ? detail::removal_rate(e.gain, tc) : e.gain;
      // Transposed generator: column `from`, row `to`.
      if (static_cast<std::size_t>(e.to) != N - 1) trip.emplace_back(e.to, e.from, rate);
      out[e.from] += rate;
    }
    for (std::size_t i = 0; i + 1 < N; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -out[i]);
    for (std::size_t j = 0; j < N; ++j) trip.emplace_back(static_cast<int>(N - 1), static_cast<int>(j), 1.0);
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("CTA/EA: singular generator");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
    b[static_cast<Eigen::Index>(N - 1)] = 1.0;
    Eigen::VectorXd p = lu.solve(b);
    std::vector<double> pi(N);
    for (std::size_t i = 0; i < N; ++i) pi[i] = std::max(0.0, p[static_cast<Eigen::Index>(i)]);
    const double s = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& v : pi) v /= s;
    return pi;
  };
  auto size_of = [&](const std::vector<double>& pi) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += std::popcount(res.states[i]) * pi[i];
    return s;
  };

  const double target = static_cast<double>(k);
  double lo = 1e-6, hi = 1.0;
  int guard = 0;
  while (size_of(stationary(lo)) > target && guard++ < 200) lo /= 4.0;
  guard = 0;
  while (size_of(stationary(hi)) < target - 1e-10 && guard++ < 400) hi *= 4.0;
  const double slo = size_of(stationary(lo)), shi = size_of(stationary(hi));
  if (!(slo <= target && shi >= target - 1e-10)) {
    std::ostringstream msg;
    msg << "CTA/EA: cannot bracket T_c (occupancy " << slo << " at " << lo << ", " << shi << " at " << hi
        << ", target " << target << ")";
    throw std::runtime_error(msg.str());
  }
  std::vector<double> pi;
  double tc = hi;
  for (res.iterations = 0; res.iterations < 300; ++res.iterations) {
    tc = std::sqrt(lo * hi);
    pi = stationary(tc);
    const double s = size_of(pi);
    if (std::abs(s - target) <= 1e-10) break;
    if (s < target) lo = tc;
    else hi = tc;
    if (hi / lo - 1.0 < 1e-15) break;
  }
  res.tc = tc;
  res.pi = std::move(pi);
  res.expected_size = size_of(res.pi);
  res.occupancy.assign(n, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::uint64_t w = res.states[i]; w; w &= w - 1) res.occupancy[std::countr_zero(w)] += res.pi[i];
  return res;
}

}  // namespace simcache
