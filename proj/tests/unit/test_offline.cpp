#include "oracles.hpp"

#include "simcache/harness.hpp"
#include "simcache/offline.hpp"

#include <gtest/gtest.h>

using namespace simcache;

namespace {

struct RandomInstance {
  FiniteSpace space;
  std::vector<ObjectId> requests;
  std::vector<ObjectId> initial;
};

RandomInstance random_instance(std::mt19937_64& rng, bool exact_only = false) {
  std::uniform_int_distribution<int> mdist(2, 6), tdist(1, 8);
  std::uniform_real_distribution<double> cost(0.0, 1.5), coin(0.0, 1.0);
  const std::size_t m = mdist(rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, m - 1))(rng);
  std::vector<double> c(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      c[i * m + j] = i == j ? 0.0 : (exact_only || coin(rng) < 0.25 ? oracle::inf : cost(rng));
  RandomInstance inst{FiniteSpace(m, c), {}, {}};
  std::vector<ObjectId> all(m);
  std::iota(all.begin(), all.end(), 0);
  std::sample(all.begin(), all.end(), std::back_inserter(inst.initial), k, rng);
  const int T = tdist(rng);
  for (int t = 0; t < T; ++t) inst.requests.push_back(static_cast<ObjectId>(rng() % m));
  return inst;
}

}  // namespace

TEST(Offline, DpMatchesExhaustiveSearch) {
  std::mt19937_64 rng(2718);
  for (int i = 0; i < 60; ++i) {
    const auto inst = random_instance(rng);
    const auto sol = dp_optimal(inst.space, CostModel(1.0), std::span<const ObjectId>(inst.requests),
                                std::span<const ObjectId>(inst.initial));
    const double want = oracle::exhaustive_offline(inst.space, 1.0, inst.requests, inst.initial);
    ASSERT_NEAR(sol.total_cost, want, 1e-12) << "instance " << i;
  }
}

TEST(Offline, ExactCachingReductionCountsMisses) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 40; ++i) {
    const auto inst = random_instance(rng, true);
    const auto sol = dp_optimal(inst.space, CostModel(1.0), std::span<const ObjectId>(inst.requests),
                                std::span<const ObjectId>(inst.initial));
    EXPECT_EQ(sol.total_cost, oracle::exhaustive_offline(inst.space, 1.0, inst.requests, inst.initial));
    EXPECT_EQ(sol.total_cost, std::round(sol.total_cost));
  }
}

TEST(Offline, ScheduleIsConsistentWithCost) {
  std::mt19937_64 rng(99);
  for (auto model : {TransitionModel::no_prefetch, TransitionModel::recurrence, TransitionModel::single_swap}) {
    for (int i = 0; i < 30; ++i) {
      const auto inst = random_instance(rng);
      const CostModel cm(1.0);
      const auto sol = dp_optimal(inst.space, cm, std::span<const ObjectId>(inst.requests), std::span<const ObjectId>(inst.initial), model);
      ASSERT_EQ(sol.states.size(), inst.requests.size() + 1);
      ASSERT_EQ(sol.actions.size(), inst.requests.size());
      auto init = inst.initial;
      std::sort(init.begin(), init.end());
      EXPECT_EQ(sol.states.front(), init);
      for (std::size_t t = 0; t + 1 < sol.states.size(); ++t) {
        EXPECT_TRUE(movement_cost<ObjectId>(sol.states[t], sol.states[t + 1], cm).is_finite());
        EXPECT_EQ(sol.states[t + 1].size(), init.size());
      }
      EXPECT_NEAR(schedule_cost(inst.space, cm, std::span<const ObjectId>(inst.requests), sol.states), sol.total_cost, 1e-12);
    }
  }
}

TEST(Offline, TransitionModelsAreNested) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    const auto inst = random_instance(rng);
    auto run = [&](TransitionModel m) {
      return dp_optimal(inst.space, CostModel(1.0), std::span<const ObjectId>(inst.requests), std::span<const ObjectId>(inst.initial), m)
          .total_cost;
    };
    const double np = run(TransitionModel::no_prefetch), rec = run(TransitionModel::recurrence), ss = run(TransitionModel::single_swap);
    EXPECT_LE(rec, np + 1e-12);
    EXPECT_LE(ss, rec + 1e-12);
  }
}

TEST(Offline, RepeatedCachedRequestCostsNothing) {
  const auto sp = oracle::toy_space();
  const std::vector<ObjectId> req(7, 2), init{0, 2};
  EXPECT_EQ(dp_optimal(sp, CostModel(1.0), std::span<const ObjectId>(req), std::span<const ObjectId>(init)).total_cost, 0.0);
}

TEST(Offline, ToySequenceMatchesExhaustive) {
  const auto sp = oracle::toy_space();
  const std::vector<ObjectId> req{1, 3, 1, 3}, init{0, 2};
  const auto sol = dp_optimal(sp, CostModel(1.0), std::span<const ObjectId>(req), std::span<const ObjectId>(init));
  EXPECT_NEAR(sol.total_cost, oracle::exhaustive_offline(sp, 1.0, req, init), 1e-15);
  // Serving 1 from 0 costs 1/16 twice; 3 must be stored once.
  EXPECT_NEAR(sol.total_cost, 1.0 + 2.0 / 16, 1e-15);
}

TEST(Offline, AppendingFreeRequestsKeepsCost) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    auto inst = random_instance(rng);
    const CostModel cm(1.0);
    const auto sol = dp_optimal(inst.space, cm, std::span<const ObjectId>(inst.requests), std::span<const ObjectId>(inst.initial));
    auto longer = inst.requests;
    longer.push_back(sol.states.back().front());
    const auto sol2 = dp_optimal(inst.space, cm, std::span<const ObjectId>(longer), std::span<const ObjectId>(inst.initial));
    EXPECT_NEAR(sol2.total_cost, sol.total_cost, 1e-12);
  }
}

TEST(Offline, ScaleGuard) {
  const TorusGrid g(20, 1.0);
  std::vector<ObjectId> req;
  for (ObjectId x = 0; x < 60; ++x) req.push_back(x * 3);
  const std::vector<ObjectId> init{1, 2, 4, 5, 7, 8, 10, 11, 13, 14};
  EXPECT_THROW(dp_optimal(g, CostModel(5.0), std::span<const ObjectId>(req), std::span<const ObjectId>(init)), ScaleGuardError);
}

TEST(Offline, OnlinePoliciesNeverBeatDp) {
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 50; ++i) {
    const auto inst = random_instance(rng);
    const CostModel cm(1.0);
    const auto req = std::span<const ObjectId>(inst.requests);
    const double np = dp_optimal(inst.space, cm, req, std::span<const ObjectId>(inst.initial)).total_cost;
    const double ss =
        dp_optimal(inst.space, cm, req, std::span<const ObjectId>(inst.initial), TransitionModel::single_swap).total_cost;
    const auto rates = empirical_rates(req, inst.space.size());
    for (const auto& name : policy_names()) {
      PolicySpec spec{.name = name, .k = inst.initial.size(), .q = 0.5};
      spec.duel = DuelParams{.delta = 0.1, .tau = 4, .beta = 0.75};
      auto p = make_policy(inst.space, cm, spec, &rates);
      CacheState<ObjectId> s(inst.initial, inst.space.size());
      p->reset(s);
      Rng prng(i);
      double total = 0.0;
      for (std::size_t t = 0; t < inst.requests.size(); ++t) total += p->on_request(inst.requests[t], s, t + 1, prng).charge(cm).value();
      EXPECT_GE(total, ss - 1e-12) << name << " instance " << i;
      if (name != "duel") {
        EXPECT_GE(total, np - 1e-12) << name << " instance " << i;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Static allocation

TEST(Static, ToyOptimum) {
  const auto sp = oracle::toy_space();
  const auto r = static_brute_force(sp, CostModel(1.0), PopularityField::dense(oracle::toy_rates()), 2);
  EXPECT_EQ(r.state, (std::vector<ObjectId>{1, 3}));
  EXPECT_NEAR(r.cost, 6.0 / 128, 1e-15);
  EXPECT_EQ(static_brute_force(sp, CostModel(1.0), PopularityField::dense(oracle::toy_rates()), 4).cost, 0.0);
}

TEST(Static, GridPairMatchesIndependentEnumerator) {
  const TorusGrid g(13, 1.0);
  const auto r = static_brute_force(g, CostModel(1000.0), PopularityField::uniform(g.size()), 2);
  const std::vector<double> w(g.size(), 1.0 / g.size());
  double best = oracle::inf;
  for (ObjectId a = 0; a < g.size(); ++a)
    for (ObjectId b = a + 1; b < g.size(); ++b) best = std::min(best, oracle::expected_cost(g, 1000.0, w, {a, b}));
  EXPECT_NEAR(r.cost, best, 1e-12);
}

TEST(Static, GreedyPicksBestSingleton) {
  const auto sp = oracle::toy_space();
  const auto rates = PopularityField::dense(oracle::toy_rates());
  const auto g = static_greedy(sp, CostModel(1.0), rates, 1);
  double best = oracle::inf;
  ObjectId arg = 0;
  for (ObjectId y = 0; y < 4; ++y) {
    const double c = oracle::expected_cost(sp, 1.0, oracle::toy_rates(), {y});
    if (c < best) best = c, arg = y;
  }
  EXPECT_EQ(g.state, (std::vector<ObjectId>{arg}));
  EXPECT_NEAR(g.cost, best, 1e-15);
  const TorusGrid grid(9, 1.0);
  EXPECT_NEAR(static_greedy(grid, CostModel(100.0), PopularityField::uniform(81), 1).cost,
              static_brute_force(grid, CostModel(100.0), PopularityField::uniform(81), 1).cost, 1e-12);
}

TEST(Static, GreedyNeverBeatsBruteForce) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 2);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> c(400), w(20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) c[i * 20 + j] = i == j ? 0 : u(rng);
    for (auto& v : w) v = u(rng);
    const FiniteSpace sp(20, c);
    const auto rates = PopularityField::dense(w);
    const double bf = static_brute_force(sp, CostModel(1.0), rates, 3).cost;
    const double gr = static_greedy(sp, CostModel(1.0), rates, 3).cost;
    EXPECT_GE(gr, bf - 1e-12);
    EXPECT_NEAR(bf, oracle::expected_cost(sp, 1.0, w, static_brute_force(sp, CostModel(1.0), rates, 3).state), 1e-12);
  }
}

TEST(Static, MaxCoverageStructure) {
  // Path graph 0-1-2-3-4-5 with zero-cost edges; one request per node; k = 2
  // closed neighbourhoods cover all 6 nodes ({1, 4}).
  const double inf = oracle::inf;
  std::vector<double> c(36, inf);
  for (int i = 0; i < 6; ++i) {
    c[i * 6 + i] = 0;
    if (i + 1 < 6) c[i * 6 + i + 1] = c[(i + 1) * 6 + i] = 0;
  }
  const FiniteSpace sp(6, c);
  const std::vector<ObjectId> req{0, 1, 2, 3, 4, 5};
  const auto r = static_brute_force(sp, CostModel(1.0), std::span<const ObjectId>(req), 2);
  EXPECT_EQ(r.cost, 0.0);
  const auto r1 = static_brute_force(sp, CostModel(1.0), std::span<const ObjectId>(req), 1);
  EXPECT_EQ(6.0 - r1.cost, 3.0);
}

TEST(Static, ScaleGuard) {
  const TorusGrid g(40, 1.0);
  EXPECT_THROW(static_brute_force(g, CostModel(10.0), PopularityField::uniform(g.size()), 5), ScaleGuardError);
}
