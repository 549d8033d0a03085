#include "oracles.hpp"

#include "simcache/costs.hpp"
#include "simcache/tracker.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace simcache;

namespace {

double toy(std::vector<ObjectId> s) {
  return expected_cost(oracle::toy_space(), CostModel(1.0), PopularityField::dense(oracle::toy_rates()),
                       std::span<const ObjectId>(s))
      .value();
}

}  // namespace

TEST(CostModel, ApproxCostDiagonalIsZero) {
  const auto sp = oracle::toy_space();
  for (ObjectId x = 0; x < 4; ++x) EXPECT_EQ(sp.approx_cost(x, x).value(), 0.0);
  EXPECT_TRUE(sp.approx_cost(0, 3).is_infinite());
  EXPECT_THROW(sp.approx_cost(0, 4), std::out_of_range);
}

TEST(CostModel, FiniteSpaceRejectsBadMatrices) {
  EXPECT_THROW(FiniteSpace(2, {1, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(FiniteSpace(2, {0, -1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(FiniteSpace(2, {0, 1, 0}), std::invalid_argument);
}

TEST(CostModel, TorusDistanceWrapsAndIsSymmetric) {
  const TorusGrid g(13, 1.0);
  EXPECT_EQ(g.approx_cost(g.id(0, 0), g.id(0, 12)).value(), 1.0);
  EXPECT_EQ(g.approx_cost(g.id(0, 0), g.id(6, 6)).value(), 12.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<ObjectId> u(0, 168);
  for (int i = 0; i < 500; ++i) {
    const ObjectId x = u(rng), y = u(rng);
    EXPECT_EQ(g.hops(x, y), g.hops(y, x));
    EXPECT_EQ(g.hops(x, y), oracle::torus_hops(13, x, y));
    EXPECT_LE(g.hops(x, y), 13);
  }
}

TEST(CostModel, TorusCostExponent) {
  const TorusGrid g(9, 2.0);
  EXPECT_DOUBLE_EQ(g.approx_cost(g.id(0, 0), g.id(1, 2)).value(), 9.0);
  const TorusGrid g0(9, 0.0);
  EXPECT_DOUBLE_EQ(g0.approx_cost(g0.id(0, 0), g0.id(1, 2)).value(), 1.0);
  EXPECT_DOUBLE_EQ(g0.approx_cost(g0.id(0, 0), g0.id(0, 0)).value(), 0.0);
}

TEST(CostModel, ContinuousSpaceNorms) {
  const ContinuousSpace l1(2, 1, 1.0, 10.0), l2(2, 2, 1.0, 10.0);
  EXPECT_DOUBLE_EQ(l1.approx_cost({0, 0}, {3, 4}).value(), 7.0);
  EXPECT_DOUBLE_EQ(l2.approx_cost({0, 0}, {3, 4}).value(), 5.0);
  EXPECT_DOUBLE_EQ(l2.approx_cost({3, 4}, {0, 0}).value(), 5.0);
}

TEST(CostModel, ExtendedModelChi) {
  const auto plain = CostModel(2.0);
  EXPECT_EQ(plain.chi().value(), 2.0);
  const auto ext = CostModel::extended(0.5, 1.5, false);
  EXPECT_EQ(ext.retrieval(), 2.0);
  EXPECT_EQ(ext.chi().value(), 2.0);
  const auto store = CostModel::extended(0.5, 1.5, true);
  EXPECT_TRUE(store.chi().is_infinite());
  EXPECT_EQ(store.retrieval(), 2.0);
  EXPECT_THROW(CostModel(0.0), std::invalid_argument);
}

TEST(CostModel, ServiceCostIsCappedApproximation) {
  const auto sp = oracle::toy_space();
  const std::vector<ObjectId> s{1, 3};
  EXPECT_DOUBLE_EQ(service_cost(sp, CostModel(1.0), 0, std::span<const ObjectId>(s)).value(), 1.0 / 16);
  EXPECT_DOUBLE_EQ(service_cost(sp, CostModel(1.0), 3, std::span<const ObjectId>(s)).value(), 0.0);
  const std::vector<ObjectId> s2{0, 3};
  EXPECT_DOUBLE_EQ(service_cost(sp, CostModel(1.0), 2, std::span<const ObjectId>(s2)).value(), 1.0);
  EXPECT_TRUE(service_cost(sp, CostModel::extended(0.5, 0.5, true), 2, std::span<const ObjectId>(s2)).is_infinite());
}

TEST(CostModel, MovementCost) {
  const CostModel cm(3.0);
  const std::vector<ObjectId> a{1, 2, 3}, same{3, 1, 2}, one{1, 2, 7}, two{1, 8, 7};
  EXPECT_EQ(movement_cost<ObjectId>(a, same, cm).value(), 0.0);
  EXPECT_EQ(movement_cost<ObjectId>(a, one, cm).value(), 3.0);
  EXPECT_TRUE(movement_cost<ObjectId>(a, two, cm).is_infinite());
}

TEST(CostModel, ExcursionCost) {
  const TorusGrid g(13, 1.0);
  EXPECT_EQ(excursion_cost(g, CostModel(4.0), g.id(0, 0), g.id(1, 1)).value(), 2.0);
  EXPECT_EQ(excursion_cost(g, CostModel(4.0), g.id(0, 0), g.id(3, 3)).value(), 4.0);
}

TEST(CostModel, CostArithmeticSaturates) {
  EXPECT_TRUE((Cost::infinite() + Cost{1.0}).is_infinite());
  EXPECT_EQ((0.0 * Cost::infinite()).value(), 0.0);
  EXPECT_THROW(Cost{-1.0}, std::invalid_argument);
}

TEST(Toy, ExactExpectedCosts) {
  EXPECT_NEAR(toy({1, 3}), 6.0 / 128, 1e-15);
  EXPECT_NEAR(toy({0, 2}), 17.0 / 128, 1e-15);
  EXPECT_NEAR(toy({0, 1}), 19.0 / 128, 1e-15);
  EXPECT_NEAR(toy({1, 2}), 19.0 / 128, 1e-15);
  EXPECT_NEAR(toy({0, 3}), 49.0 / 128, 1e-15);
  EXPECT_NEAR(toy({2, 3}), 49.0 / 128, 1e-15);
}

TEST(Toy, AgreesWithDefinitionOracle) {
  const auto sp = oracle::toy_space();
  for (ObjectId a = 0; a < 4; ++a)
    for (ObjectId b = a + 1; b < 4; ++b)
      EXPECT_DOUBLE_EQ(toy({a, b}), oracle::expected_cost(sp, 1.0, oracle::toy_rates(), {a, b}));
}

TEST(ExpectedCost, GridFastPathMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int side : {5, 8, 13}) {
    for (double gamma : {0.5, 1.0, 2.0}) {
      const TorusGrid g(side, gamma);
      const std::size_t n = g.size();
      std::vector<double> w(n);
      std::uniform_real_distribution<double> u(0, 1);
      for (auto& v : w) v = u(rng) < 0.2 ? 0.0 : u(rng);
      std::vector<ObjectId> all(n);
      std::iota(all.begin(), all.end(), 0);
      std::vector<ObjectId> cache;
      std::sample(all.begin(), all.end(), std::back_inserter(cache), side, rng);
      for (double cr : {3.0, 1000.0}) {
        const double got = expected_cost(g, CostModel(cr), PopularityField::dense(w), std::span<const ObjectId>(cache)).value();
        const double want = oracle::expected_cost(g, cr, w, cache);
        EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want)) << side << ' ' << gamma << ' ' << cr;
      }
    }
  }
}

TEST(ExpectedCost, HomogeneousTessellationValue) {
  // 13 centers of radius-2 diamonds: 1 at distance 0, 4 at 1, 8 at 2 per center.
  const TorusGrid g(13, 1.0);
  std::vector<ObjectId> centers;
  for (int r = 0; r < 13; ++r) centers.push_back(g.id(r, (8 * r) % 13));
  const double c = expected_cost(g, CostModel(1000.0), PopularityField::uniform(169), std::span<const ObjectId>(centers)).value();
  EXPECT_NEAR(c, 13.0 * 20.0 / 169.0, 1e-12);
}

TEST(ExpectedCost, PopularitySparseEqualsDense) {
  const auto sp = oracle::toy_space();
  const auto sparse = PopularityField::sparse(4, {{0, 3.0 / 8}, {1, 1.0 / 8}, {2, 3.0 / 8}, {3, 1.0 / 8}});
  const std::vector<ObjectId> s{1, 3};
  EXPECT_DOUBLE_EQ(expected_cost(sp, CostModel(1.0), sparse, std::span<const ObjectId>(s)).value(), 6.0 / 128);
}

// ---------------------------------------------------------------------------
// Incremental tracker against full re-evaluation.

template <class S>
void check_tracker(const S& space, double cr, const std::vector<double>& w, std::size_t k, std::uint64_t seed, int swaps) {
  std::mt19937_64 rng(seed);
  const std::size_t n = space.size();
  std::vector<ObjectId> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<ObjectId> cache;
  std::sample(all.begin(), all.end(), std::back_inserter(cache), k, rng);
  std::shuffle(cache.begin(), cache.end(), rng);
  const CostModel cm(cr);
  const auto rates = PopularityField::dense(w);
  IncrementalCost<S> tr(space, cm, rates, std::span<const ObjectId>(cache));
  std::uniform_int_distribution<ObjectId> pick(0, static_cast<ObjectId>(n - 1));
  std::uniform_int_distribution<std::uint32_t> slot(0, static_cast<std::uint32_t>(k - 1));
  for (int i = 0; i < swaps; ++i) {
    ObjectId x;
    do x = pick(rng);
    while (std::find(cache.begin(), cache.end(), x) != cache.end());
    const std::uint32_t s = slot(rng);
    const double full = oracle::expected_cost(space, cr, w, [&] {
      auto c = cache;
      c[s] = x;
      return c;
    }()) - oracle::expected_cost(space, cr, w, cache);
    const double inc = tr.delta(x, s);
    ASSERT_NEAR(inc, full, 1e-9 * std::max(1.0, std::abs(full))) << "swap " << i;
    std::vector<double> all_slots;
    tr.evaluate_insert(x, all_slots);
    ASSERT_NEAR(all_slots[s], full, 1e-9 * std::max(1.0, std::abs(full)));
    if (rng() % 2) {
      tr.apply_swap(s, x);
      cache[s] = x;
      const double total = oracle::expected_cost(space, cr, w, cache);
      ASSERT_NEAR(tr.total(), total, 1e-9 * std::max(1.0, total));
    }
  }
}

TEST(Tracker, DeltaMatchesFullEvaluationOnGrid) {
  const TorusGrid g(13, 1.0);
  std::mt19937_64 rng(3);
  std::vector<double> w(g.size());
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : w) v = u(rng);
  check_tracker(g, 1000.0, w, 13, 1, 400);
  check_tracker(g, 4.0, w, 13, 2, 400);
  check_tracker(g, 2.0, std::vector<double>(g.size(), 1.0), 5, 3, 400);
}

TEST(Tracker, DeltaMatchesFullEvaluationOnMatrix) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 6 + rep % 7;
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m[i * n + j] = i == j ? 0.0 : (u(rng) < 0.3 ? oracle::inf : u(rng));
    std::vector<double> w(n);
    for (auto& v : w) v = u(rng) < 0.5 ? 0.0 : u(rng);
    check_tracker(FiniteSpace(n, m), 1.5, w, 1 + rep % 4, 100 + rep, 60);
  }
}

TEST(Tracker, DeltaFullHelperAgrees) {
  const auto sp = oracle::toy_space();
  const std::vector<ObjectId> s{0, 2};
  const double d = delta_cost_full(sp, CostModel(1.0), PopularityField::dense(oracle::toy_rates()), std::span<const ObjectId>(s), 1, 0);
  EXPECT_NEAR(d, (19.0 - 17.0) / 128, 1e-15);
}

TEST(Tracker, ResyncKeepsTotalsExact) {
  const TorusGrid g(8, 1.0);
  std::vector<ObjectId> c{0, 9, 18, 27};
  IncrementalCost<TorusGrid> tr(g, CostModel(50.0), PopularityField::uniform(64), std::span<const ObjectId>(c));
  for (ObjectId x = 40; x < 60; ++x) {
    if (std::find(c.begin(), c.end(), x) != c.end()) continue;
    tr.apply_swap(x % 4, x);
    c[x % 4] = x;
  }
  tr.resync();
  EXPECT_NEAR(tr.total(), tr.exact_total(), 1e-12);
  EXPECT_NEAR(tr.total(), oracle::expected_cost(g, 50.0, std::vector<double>(64, 1.0 / 64), c), 1e-12);
}
