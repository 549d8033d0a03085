// Library walkthrough on the four-object toy instance: expected costs of the
// two locally optimal states, then Greedy and OSA runs from random states.

#include "simcache/harness.hpp"
#include "simcache/offline.hpp"

#include <cstdio>
#include <limits>

using namespace simcache;

int main() {
  const double inf = std::numeric_limits<double>::infinity(), a = 1.0 / 16;
  const FiniteSpace space(4, {0, a, inf, inf, a, 0, a, inf, inf, a, 0, inf, inf, inf, inf, 0});
  const CostModel cm(1.0);
  const auto rates = PopularityField::dense({3.0 / 8, 1.0 / 8, 3.0 / 8, 1.0 / 8});

  for (std::vector<ObjectId> s : {std::vector<ObjectId>{1, 3}, std::vector<ObjectId>{0, 2}})
    std::printf("C({%u,%u}) = %.6f\n", s[0], s[1], expected_cost(space, cm, rates, std::span<const ObjectId>(s)).value());

  const auto best = static_brute_force(space, cm, rates, 2);
  std::printf("static optimum {%u,%u}, cost %.6f\n", best.state[0], best.state[1], best.cost);

  Instance<FiniteSpace> inst;
  inst.space = &space;
  inst.cm = cm;
  inst.source = RequestSource::irm({{rates, 0}});
  inst.known_rates = rates;
  const RunOptions opt{.horizon = 20000, .checkpoints = geometric_checkpoints(20000, 2), .seed = 1, .replicas = 20};
  for (const char* name : {"greedy", "osa"}) {
    PolicySpec spec;
    spec.name = name;
    spec.k = 2;
    const auto res = run(inst, spec, opt);
    std::size_t at_best = 0;
    for (const auto& r : res) at_best += r.final_state == best.state;
    const auto rows = summarize(res);
    std::printf("%-6s final inst_cost %.5f (se %.5f), %zu/%zu replicas at the optimum\n", name, rows.back().inst_mean,
                rows.back().inst_se, at_best, res.size());
  }
}
