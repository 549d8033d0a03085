#include "oracles.hpp"

#include "simcache/harness.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace simcache;

namespace {

const CostModel kUnit(1.0);

PopularityField toy_rates() { return PopularityField::dense(oracle::toy_rates()); }

template <class P>
PolicyDecision<ObjectId> step(P& p, CacheState<ObjectId>& s, ObjectId x, std::uint64_t t, Rng& rng) {
  return p.on_request(x, s, t, rng);
}

/// Exhaustive best single swap by full evaluation; nullopt when none improves.
std::optional<std::pair<ObjectId, ObjectId>> best_swap(const FiniteSpace& sp, double chi, const std::vector<double>& w,
                                                       const std::vector<ObjectId>& s, ObjectId x) {
  const double base = oracle::expected_cost(sp, chi, w, s);
  std::optional<std::pair<ObjectId, ObjectId>> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto next = s;
    next[i] = x;
    const double d = oracle::expected_cost(sp, chi, w, next) - base;
    if (d < best_d - 1e-15) {
      best_d = d;
      best = {{x, s[i]}};
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Greedy

TEST(Greedy, StuckInSuboptimalToyState) {
  const auto sp = oracle::toy_space();
  GreedyPolicy<FiniteSpace> g(sp, kUnit, toy_rates());
  CacheState<ObjectId> s({0, 2}, 4);
  g.reset(s);
  Rng rng(1);
  for (ObjectId x = 0; x < 4; ++x) {
    const auto d = step(g, s, x, 1, rng);
    EXPECT_FALSE(d.state_changed);
  }
  EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{0, 2}));
}

TEST(Greedy, CachedRequestServedExactly) {
  const auto sp = oracle::toy_space();
  GreedyPolicy<FiniteSpace> g(sp, kUnit, toy_rates());
  CacheState<ObjectId> s({1, 3}, 4);
  g.reset(s);
  Rng rng(1);
  const auto d = step(g, s, 3, 1, rng);
  EXPECT_EQ(d.service_cost_paid.value(), 0.0);
  EXPECT_EQ(d.outcome, Outcome::exact_hit);
  EXPECT_FALSE(d.retrieval_performed);
}

TEST(Greedy, SwapMatchesExhaustiveArgmin) {
  const auto sp = oracle::toy_space();
  for (auto init : std::vector<std::vector<ObjectId>>{{0, 1}, {1, 2}, {0, 3}, {2, 3}, {0, 2}, {1, 3}}) {
    for (ObjectId x = 0; x < 4; ++x) {
      GreedyPolicy<FiniteSpace> g(sp, kUnit, toy_rates());
      CacheState<ObjectId> s(init, 4);
      g.reset(s);
      Rng rng(1);
      const bool cached = std::find(init.begin(), init.end(), x) != init.end();
      const auto want = cached ? std::nullopt : best_swap(sp, 1.0, oracle::toy_rates(), init, x);
      const auto d = step(g, s, x, 1, rng);
      ASSERT_EQ(d.state_changed, want.has_value());
      if (want) {
        EXPECT_EQ(*d.inserted, want->first);
        EXPECT_EQ(*d.evicted, want->second);
        EXPECT_EQ(d.service_cost_paid.value(), 0.0);
      }
    }
  }
}

TEST(Greedy, TieBreaksOnSmallestEvictedId) {
  // Three cached objects, all equally useless; inserting x helps equally whatever is evicted.
  const double inf = oracle::inf;
  const FiniteSpace sp(4, {0, inf, inf, inf, inf, 0, inf, inf, inf, inf, 0, inf, inf, inf, inf, 0});
  GreedyPolicy<FiniteSpace> g(sp, kUnit, PopularityField::dense({0.0, 0.0, 0.0, 1.0}));
  CacheState<ObjectId> s({2, 0, 1}, 4);
  g.reset(s);
  Rng rng(1);
  const auto d = step(g, s, 3, 1, rng);
  ASSERT_TRUE(d.state_changed);
  EXPECT_EQ(*d.evicted, 0u);
}

TEST(Greedy, MonotoneAndLocallyOptimalOnGrid) {
  const TorusGrid g(13, 1.0);
  std::vector<double> w(g.size());
  Rng wr(4);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (auto& v : w) v = u(wr);
  const auto rates = PopularityField::dense(w).normalized();
  const auto dense = rates.to_dense();
  GreedyPolicy<TorusGrid> p(g, CostModel(1000.0), rates);
  CacheState<ObjectId> s(draw_initial_state(g, 13, 5, 0), g.size());
  p.reset(s);
  Rng rng(6);
  IrmStream stream(rates);
  double last = oracle::expected_cost(g, 1000.0, dense, std::vector<ObjectId>(s.contents().begin(), s.contents().end()));
  for (std::uint64_t t = 1; t <= 20000; ++t) {
    const auto d = p.on_request(stream.next(rng).object, s, t, rng);
    if (d.state_changed) {
      const double now = oracle::expected_cost(g, 1000.0, dense, std::vector<ObjectId>(s.contents().begin(), s.contents().end()));
      ASSERT_LE(now, last + 1e-12);
      last = now;
    }
  }
  EXPECT_EQ(p.cost_increases(), 0u);
  const auto fin = s.sorted();
  const double base = oracle::expected_cost(g, 1000.0, dense, fin);
  for (std::size_t i = 0; i < fin.size(); ++i) {
    for (ObjectId x = 0; x < g.size(); ++x) {
      if (std::binary_search(fin.begin(), fin.end(), x)) continue;
      auto next = fin;
      next[i] = x;
      ASSERT_GE(oracle::expected_cost(g, 1000.0, dense, next) - base, -1e-12);
    }
  }
}

TEST(Greedy, RejectsInfiniteChi) {
  const auto sp = oracle::toy_space();
  EXPECT_THROW(GreedyPolicy<FiniteSpace>(sp, CostModel::extended(0.5, 0.5, true), toy_rates()), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// OSA

TEST(Osa, ImprovingSwapAlwaysAccepted) {
  const auto sp = oracle::toy_space();
  TemperatureSchedule fixed{.kind = TemperatureSchedule::Kind::fixed, .fixed = 1e-9};
  int accepted = 0;
  for (int i = 0; i < 200; ++i) {
    OsaPolicy<FiniteSpace> p(sp, kUnit, toy_rates(), fixed);
    CacheState<ObjectId> s({0, 1}, 4);  // 19/128; inserting 3 over 0 gives 6/128, over 1 gives 49/128
    p.reset(s);
    Rng rng(i);
    const auto d = p.on_request(3, s, 1, rng);
    if (d.state_changed) {
      ++accepted;
      EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{1, 3}));
    } else {
      EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{0, 1}));
    }
  }
  // Uniform eviction picks slot 0 half of the time; worse moves are never accepted at T ~ 0.
  EXPECT_GT(accepted, 60);
  EXPECT_LT(accepted, 140);
}

TEST(Osa, DetailedBalanceAtFixedTemperature) {
  // Stationary law of the chain over 2-subsets: pi(S) ~ prod_{y in S} lambda_y * exp(-C(S) / T).
  const auto sp = oracle::toy_space();
  const auto w = oracle::toy_rates();
  const double T = 0.08;
  std::map<std::vector<ObjectId>, double> pi;
  double z = 0.0;
  for (ObjectId a = 0; a < 4; ++a)
    for (ObjectId b = a + 1; b < 4; ++b) {
      const double v = w[a] * w[b] * std::exp(-oracle::expected_cost(sp, 1.0, w, {a, b}) / T);
      pi[{a, b}] = v;
      z += v;
    }
  for (auto& [k, v] : pi) v /= z;

  TemperatureSchedule fixed{.kind = TemperatureSchedule::Kind::fixed, .fixed = T};
  OsaPolicy<FiniteSpace> p(sp, kUnit, toy_rates(), fixed);
  CacheState<ObjectId> s({0, 3}, 4);
  p.reset(s);
  Rng rng(2024);
  IrmStream stream(toy_rates());
  const std::uint64_t burn = 10000, batches = 50, per_batch = 40000;
  for (std::uint64_t t = 1; t <= burn; ++t) p.on_request(stream.next(rng).object, s, t, rng);
  std::map<std::vector<ObjectId>, std::vector<double>> frac;
  for (std::uint64_t b = 0; b < batches; ++b) {
    std::map<std::vector<ObjectId>, double> count;
    for (std::uint64_t i = 0; i < per_batch; ++i) {
      p.on_request(stream.next(rng).object, s, burn + b * per_batch + i + 1, rng);
      count[s.sorted()] += 1.0;
    }
    for (const auto& [k, v] : pi) frac[k].push_back(count[k] / per_batch);
  }
  for (const auto& [k, want] : pi) {
    const auto& f = frac[k];
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (f.size() - 1) / f.size());
    EXPECT_NEAR(mean, want, 3.0 * se + 1e-4) << k[0] << ',' << k[1];
  }
}

TEST(Osa, TemperatureSchedules) {
  TemperatureSchedule pw{.kind = TemperatureSchedule::Kind::power, .scale = 2.0, .exponent = 0.5};
  EXPECT_DOUBLE_EQ(pw.at(4, 1), 1.0);
  TemperatureSchedule th{.kind = TemperatureSchedule::Kind::logarithmic, .delta_max = 3.0};
  EXPECT_DOUBLE_EQ(th.at(1, 2), 6.0);
  EXPECT_NEAR(th.at(100, 2), 6.0 / (1.0 + std::log(100.0)), 1e-12);
}

TEST(Osa, WeightedEvictionStillConverges) {
  const auto sp = oracle::toy_space();
  OsaPolicy<FiniteSpace> p(sp, kUnit, toy_rates(), TemperatureSchedule{}, OsaPolicy<FiniteSpace>::Eviction::weighted);
  CacheState<ObjectId> s({0, 2}, 4);
  p.reset(s);
  Rng rng(3);
  IrmStream stream(toy_rates());
  for (std::uint64_t t = 1; t <= 100000; ++t) p.on_request(stream.next(rng).object, s, t, rng);
  EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{1, 3}));
}

// ---------------------------------------------------------------------------
// qLRU-dC and RND-LRU

TEST(QlruDc, HandEvaluatedToyProbabilities) {
  // S = {0, 2}, x = 1, q = 1: z = 0 (tie), refresh probability 0, insertion probability 1/16.
  const auto sp = oracle::toy_space();
  Rng rng(77);
  const int n = 64000;
  int inserted = 0;
  for (int i = 0; i < n; ++i) {
    QlruDcPolicy<FiniteSpace> p(sp, kUnit, 1.0);
    CacheState<ObjectId> s({2, 0}, 4);  // front = 2, tail = 0
    const auto d = p.on_request(1, s, 1, rng);
    if (d.state_changed) {
      ++inserted;
      EXPECT_EQ(*d.inserted, 1u);
      EXPECT_EQ(s[s.front_slot()], 1u);
    } else {
      EXPECT_EQ(d.served_object, 0u);
      EXPECT_DOUBLE_EQ(d.service_cost_paid.value(), 1.0 / 16);
      EXPECT_EQ(s.queue(), (std::vector<ObjectId>{2, 0}));
    }
  }
  const double p = 1.0 / 16, se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(inserted / double(n), p, 4 * se);
}

TEST(QlruDc, CachedRequestNeverInserts) {
  const TorusGrid g(9, 1.0);
  const CostModel cm(4.0);
  Rng rng(1);
  int refreshed = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    QlruDcPolicy<TorusGrid> p(g, cm, 1.0);
    // x = (0,0) is cached at the tail; the next nearest cached point is 2 hops away.
    CacheState<ObjectId> s({g.id(4, 4), g.id(0, 2), g.id(0, 0)}, g.size());
    const auto d = p.on_request(g.id(0, 0), s, 1, rng);
    EXPECT_FALSE(d.state_changed);
    EXPECT_EQ(d.outcome, Outcome::exact_hit);
    refreshed += s[s.front_slot()] == g.id(0, 0);
  }
  // refresh probability (C(x, S \ {x}) - 0) / C_r = 2 / 4
  EXPECT_NEAR(refreshed / double(n), 0.5, 4 * std::sqrt(0.25 / n));
}

TEST(QlruDc, BoundaryInsertionProbabilityIsQ) {
  const TorusGrid g(9, 1.0);
  const CostModel cm(3.0);  // x is exactly 3 hops from the only cached object
  Rng rng(5);
  const int n = 40000;
  int ins = 0;
  for (int i = 0; i < n; ++i) {
    QlruDcPolicy<TorusGrid> p(g, cm, 0.3);
    CacheState<ObjectId> s({g.id(0, 0)}, g.size());
    ins += p.on_request(g.id(1, 2), s, 1, rng).state_changed;
  }
  EXPECT_NEAR(ins / double(n), 0.3, 4 * std::sqrt(0.21 / n));
}

TEST(QlruDc, MissInsertsWithProbabilityQ) {
  const auto sp = oracle::toy_space();
  Rng rng(8);
  const int n = 40000;
  int ins = 0;
  for (int i = 0; i < n; ++i) {
    QlruDcPolicy<FiniteSpace> p(sp, kUnit, 0.2);
    CacheState<ObjectId> s({0, 1}, 4);
    const ObjectId tail = s[s.back_slot()];
    const auto d = p.on_request(3, s, 1, rng);
    EXPECT_EQ(d.outcome, Outcome::miss);
    ins += d.state_changed;
    if (d.state_changed) {
      EXPECT_EQ(*d.evicted, tail);
    }
  }
  EXPECT_NEAR(ins / double(n), 0.2, 4 * std::sqrt(0.16 / n));
}

TEST(RndLru, CachedRequestRefreshesWithoutMiss) {
  const TorusGrid g(9, 1.0);
  RndLruPolicy<TorusGrid> p(g, CostModel(4.0), 1.0);
  CacheState<ObjectId> s({g.id(4, 4), g.id(0, 0)}, g.size());
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto d = p.on_request(g.id(0, 0), s, 1, rng);
    EXPECT_FALSE(d.state_changed);
    EXPECT_EQ(s[s.front_slot()], g.id(0, 0));
  }
}

TEST(RndLru, FullMissProbabilityAtRetrievalCost) {
  const TorusGrid g(9, 1.0);
  RndLruPolicy<TorusGrid> p(g, CostModel(3.0), 1.0);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    CacheState<ObjectId> s({g.id(0, 0)}, g.size());
    EXPECT_TRUE(p.on_request(g.id(1, 2), s, 1, rng).state_changed);
  }
}

TEST(RndLru, MissProbabilityScalesWithDistance) {
  const TorusGrid g(9, 1.0);
  Rng rng(3);
  const int n = 40000;
  int miss = 0;
  for (int i = 0; i < n; ++i) {
    RndLruPolicy<TorusGrid> p(g, CostModel(10.0), 0.5);
    CacheState<ObjectId> s({g.id(0, 0)}, g.size());
    miss += p.on_request(g.id(2, 2), s, 1, rng).state_changed;  // 0.5 * 4 / 10
  }
  EXPECT_NEAR(miss / double(n), 0.2, 4 * std::sqrt(0.16 / n));
}

TEST(LruFamily, QueueStaysAPermutation) {
  const TorusGrid g(13, 1.0);
  const auto rates = PopularityField::uniform(g.size());
  for (const char* name : {"qlru_dc", "rnd_lru", "lru"}) {
    PolicySpec spec{.name = name, .k = 13, .q = 0.3};
    auto p = make_policy(g, CostModel(5.0), spec, &rates);
    CacheState<ObjectId> s(draw_initial_state(g, 13, 1, 0), g.size());
    p->reset(s);
    Rng rng(9);
    IrmStream stream(rates);
    for (std::uint64_t t = 1; t <= 5000; ++t) {
      const auto d = p->on_request(stream.next(rng).object, s, t, rng);
      ASSERT_TRUE(!d.state_changed || d.retrieval_performed);
      ASSERT_TRUE(s.consistent());
    }
  }
}

// ---------------------------------------------------------------------------
// Duel

TEST(Duel, ChallengerWinsAfterExpectedFeeds) {
  // k = 1: incumbent 0, challenger 1 at cost c = 0.3; each request for 1 widens
  // the gap by c, so the challenger needs floor(delta / c) + 1 feeds.
  const FiniteSpace sp(2, {0, 0.3, 0.3, 0});
  DuelPolicy<FiniteSpace> p(sp, kUnit, DuelParams{.delta = 1.0, .tau = 1000, .beta = 1.0});
  CacheState<ObjectId> s({0}, 2);
  p.reset(s);
  Rng rng(1);
  auto d = p.on_request(1, s, 1, rng);  // admission only
  EXPECT_FALSE(d.state_changed);
  ASSERT_EQ(p.duels().size(), 1u);
  for (std::uint64_t t = 2; t <= 4; ++t) {
    d = p.on_request(1, s, t, rng);
    EXPECT_FALSE(d.state_changed) << t;
  }
  d = p.on_request(1, s, 5, rng);
  EXPECT_TRUE(d.state_changed);
  EXPECT_EQ(*d.inserted, 1u);
  EXPECT_EQ(*d.evicted, 0u);
  EXPECT_EQ(d.service_cost_paid.value(), 0.0);
  EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{1}));
  EXPECT_TRUE(p.duels().empty());
}

TEST(Duel, TwinChallengerLosesOnTimeout) {
  // Objects 0 and 1 are interchangeable, so counters always tie.
  const FiniteSpace sp(3, {0, 0, 0.5, 0, 0, 0.5, 0.5, 0.5, 0});
  DuelPolicy<FiniteSpace> p(sp, kUnit, DuelParams{.delta = 0.1, .tau = 10, .beta = 1.0});
  CacheState<ObjectId> s({0}, 3);
  p.reset(s);
  Rng rng(4);
  p.on_request(1, s, 1, rng);
  ASSERT_EQ(p.duels().size(), 1u);
  for (std::uint64_t t = 2; t <= 20; ++t) {
    const auto d = p.on_request(t % 2 ? 1 : 2, s, t, rng);
    EXPECT_FALSE(d.state_changed);
    if (t <= 11) {
      ASSERT_EQ(p.duels().size(), 1u) << t;
    }
    if (t == 12) {
      EXPECT_TRUE(p.duels().empty() || p.duels().front().start_time == 12);
    }
  }
  EXPECT_EQ(s.sorted(), (std::vector<ObjectId>{0}));
}

TEST(Duel, BookkeepingInvariantsOnGrid) {
  const TorusGrid g(13, 1.0);
  const auto rates = gaussian_rates(g, 13.0 / 8);
  DuelPolicy<TorusGrid> p(g, CostModel(1000.0), DuelParams{.delta = 5, .tau = 65, .beta = 0.75});
  CacheState<ObjectId> s(draw_initial_state(g, 13, 3, 0), g.size());
  p.reset(s);
  Rng rng(12);
  IrmStream stream(rates);
  std::size_t changes = 0;
  for (std::uint64_t t = 1; t <= 50000; ++t) {
    const auto d = p.on_request(stream.next(rng).object, s, t, rng);
    changes += d.state_changed;
    ASSERT_TRUE(p.consistent(s)) << t;
    ASSERT_EQ(s.size(), 13u);
  }
  EXPECT_GT(changes, 0u);
}

TEST(Duel, DensifiesTowardGaussianCenter) {
  const TorusGrid g(25, 1.0);
  const auto rates = gaussian_rates(g, 25.0 / 8);
  DuelPolicy<TorusGrid> p(g, CostModel(1000.0), DuelParams{.delta = 10, .tau = 250, .beta = 0.75});
  CacheState<ObjectId> s(draw_initial_state(g, 25, 8, 0), g.size());
  p.reset(s);
  Rng rng(13);
  IrmStream stream(rates);
  for (std::uint64_t t = 1; t <= 200000; ++t) p.on_request(stream.next(rng).object, s, t, rng);
  const ObjectId c = g.id(12, 12);
  std::size_t central = 0;
  for (ObjectId x : s.contents()) central += g.hops(x, c) <= 6;
  // The central diamond of radius 6 is 85 of 625 points: a uniform share would be ~3.4 of 25.
  EXPECT_GT(central, 10u);
}

// ---------------------------------------------------------------------------
// Exact-caching baselines

TEST(Baselines, LruExactHitRefreshes) {
  const auto sp = oracle::toy_space();
  LruPolicy<FiniteSpace> p(sp, kUnit);
  CacheState<ObjectId> s({0, 1}, 4);
  Rng rng(1);
  const auto d = p.on_request(1, s, 1, rng);
  EXPECT_FALSE(d.retrieval_performed);
  EXPECT_EQ(s[s.front_slot()], 1u);
  const auto m = p.on_request(2, s, 2, rng);
  EXPECT_TRUE(m.state_changed);
  EXPECT_EQ(*m.evicted, 0u);
  EXPECT_EQ(m.outcome, Outcome::miss);
}

TEST(Baselines, WholeCatalogFitsNoFurtherMisses) {
  const TorusGrid g(3, 1.0);
  for (const char* name : {"lru", "random"}) {
    auto p = make_policy(g, CostModel(100.0), PolicySpec{.name = name, .k = 9}, nullptr);
    std::vector<ObjectId> all(9);
    std::iota(all.begin(), all.end(), 0);
    CacheState<ObjectId> s(all, 9);
    Rng rng(1);
    for (std::uint64_t t = 1; t <= 200; ++t) EXPECT_FALSE(p->on_request(static_cast<ObjectId>(rng() % 9), s, t, rng).state_changed);
  }
}

TEST(Baselines, RandomEvictsUniformly) {
  const auto sp = oracle::toy_space();
  std::map<ObjectId, int> ev;
  Rng rng(5);
  for (int i = 0; i < 30000; ++i) {
    RandomPolicy<FiniteSpace> p(sp, kUnit);
    CacheState<ObjectId> s({0, 1, 2}, 4);
    ++ev[*p.on_request(3, s, 1, rng).evicted];
  }
  for (ObjectId y : {0u, 1u, 2u}) EXPECT_NEAR(ev[y] / 30000.0, 1.0 / 3, 0.015);
}

TEST(Baselines, ContinuousRequestsAlwaysMiss) {
  const ContinuousSpace sp(2, 2, 1.0, 10.0);
  LruPolicy<ContinuousSpace> p(sp, CostModel(2.0));
  CacheState<Point> s({{1, 1}, {5, 5}, {9, 9}});
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 10);
  int misses = 0;
  for (std::uint64_t t = 1; t <= 1000; ++t) misses += p.on_request(Point{u(rng), u(rng)}, s, t, rng).state_changed;
  EXPECT_EQ(misses, 1000);
}

TEST(Policies, FactoryRejectsUnknownAndMissingRates) {
  const auto sp = oracle::toy_space();
  EXPECT_THROW(make_policy(sp, kUnit, PolicySpec{.name = "nope", .k = 2}, nullptr), ConfigError);
  EXPECT_THROW(make_policy(sp, kUnit, PolicySpec{.name = "greedy", .k = 2}, nullptr), ConfigError);
  EXPECT_THROW(QlruDcPolicy<FiniteSpace>(sp, kUnit, 0.0), std::invalid_argument);
  EXPECT_THROW(DuelPolicy<FiniteSpace>(sp, kUnit, DuelParams{.delta = 0}), std::invalid_argument);
}
