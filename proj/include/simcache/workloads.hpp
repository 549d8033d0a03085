#pragma once

#include "simcache/csv.hpp"
#include "simcache/errors.hpp"
#include "simcache/popularity.hpp"
#include "simcache/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace simcache {

// ---------------------------------------------------------------------------
// Grids and rate fields.

/// L = 1 + 2l(l+1): the side for which k = L diamonds of radius l tile the torus.
inline int grid_side(int l) {
  if (l < 1) throw std::invalid_argument("l must be positive");
  return 1 + 2 * l * (l + 1);
}

inline TorusGrid build_grid(int l, double gamma) { return TorusGrid(grid_side(l), gamma); }

/// Rates proportional to exp(-d^2 / (2 sigma^2)), d the hop distance from
/// `center` (the grid center by default), normalized to sum 1.
inline PopularityField gaussian_rates(const TorusGrid& grid, double sigma, std::optional<ObjectId> center = std::nullopt) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const ObjectId c = center.value_or(grid.id(grid.center()));
  std::vector<double> r(grid.size());
  for (ObjectId x = 0; x < grid.size(); ++x) {
    const double d = grid.hops(x, c);
    r[x] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(r.begin(), r.end(), 0.0);
  for (double& v : r) v /= total;
  return PopularityField::dense(std::move(r));
}

// ---------------------------------------------------------------------------
// Independent reference model.

struct Request {
  double time = 0.0;
  ObjectId object = 0;
};

/// Requests drawn i.i.d. from a rate field, with unit-intensity Poisson arrivals.
class IrmStream {
 public:
  explicit IrmStream(const PopularityField& rates) {
    std::vector<double> w;
    rates.for_each([&](ObjectId x, double r) {
      ids_.push_back(x);
      w.push_back(r);
    });
    if (ids_.empty()) throw std::invalid_argument("rate field has no positive entry");
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  template <class Rng>
  Request next(Rng& rng) {
    now_ += gap_(rng);
    return {now_, ids_[pick_(rng)]};
  }

 private:
  std::vector<ObjectId> ids_;
  std::discrete_distribution<std::size_t> pick_;
  std::exponential_distribution<double> gap_{1.0};
  double now_ = 0.0;
};

template <class Rng>
std::vector<Request> sample_irm(const PopularityField& rates, std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
  IrmStream s(rates);
  std::vector<Request> out;
  out.reserve(horizon);
  for (std::size_t i = 0; i < horizon; ++i) out.push_back(s.next(rng));
  return out;
}

// ---------------------------------------------------------------------------
// Traces.

struct TraceRecord {
  double timestamp = 0.0;
  std::string key;
  std::vector<double> features;
};

/// `timestamp,key[,v1..vp]` rows. A non-numeric first line is a header.
/// Objects requested fewer than `min_count` times are dropped.
inline std::vector<TraceRecord> read_trace(std::istream& in, std::size_t min_count = 0) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0, dim = 0;
  bool have_dim = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = csv::split(t);
    double ts;
    if (f.size() < 2 || !csv::parse_double(f[0], ts)) {
      if (out.empty() && lineno == 1) continue;
      throw ConfigError("trace line " + std::to_string(lineno) + ": expected timestamp,key");
    }
    TraceRecord r;
    r.timestamp = ts;
    r.key = std::string(f[1]);
    for (std::size_t i = 2; i < f.size(); ++i) r.features.push_back(csv::to_double(f[i], lineno));
    if (!have_dim) {
      dim = r.features.size();
      have_dim = true;
    } else if (r.features.size() != dim) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": inconsistent feature dimension");
    }
    if (!out.empty() && ts < out.back().timestamp)
      throw ConfigError("trace line " + std::to_string(lineno) + ": timestamps must be non-decreasing");
    out.push_back(std::move(r));
  }
  if (min_count > 1) {
    std::unordered_map<std::string, std::size_t> count;
    for (const auto& r : out) ++count[r.key];
    std::erase_if(out, [&](const TraceRecord& r) { return count[r.key] < min_count; });
  }
  return out;
}

inline std::vector<TraceRecord> read_trace(const std::string& path, std::size_t min_count = 0) {
  auto in = csv::open_in(path);
  return read_trace(in, min_count);
}

/// Distinct keys ordered by decreasing request count; ties by first appearance.
inline std::vector<std::string> popularity_ranking(std::span<const TraceRecord> trace) {
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> stats;  // count, first index
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto [it, fresh] = stats.try_emplace(trace[i].key, 0, i);
    if (fresh) keys.push_back(trace[i].key);
    ++it->second.first;
  }
  std::stable_sort(keys.begin(), keys.end(), [&](const std::string& a, const std::string& b) {
    return stats[a].first > stats[b].first;
  });
  return keys;
}

/// Grid points in expanding norm-1 rings around the center. Within ring r the
/// walk starts at offset (row 0, col +r) and proceeds clockwise; points
/// already reached through wrap-around are skipped.
inline std::vector<ObjectId> spiral_order(const TorusGrid& grid) {
  const GridPoint c = grid.center();
  std::vector<char> seen(grid.size(), 0);
  std::vector<ObjectId> out;
  out.reserve(grid.size());
  auto visit = [&](int dr, int dc) {
    const ObjectId id = grid.id(c.row + dr, c.col + dc);
    if (!seen[id]) {
      seen[id] = 1;
      out.push_back(id);
    }
  };
  visit(0, 0);
  for (int r = 1; out.size() < grid.size(); ++r) {
    for (int i = 0; i < r; ++i) visit(i, r - i);
    for (int i = 0; i < r; ++i) visit(r - i, -i);
    for (int i = 0; i < r; ++i) visit(-i, -r + i);
    for (int i = 0; i < r; ++i) visit(-r + i, i);
  }
  return out;
}

enum class TraceMapping { uniform, spiral };

struct MappedTrace {
  std::vector<ObjectId> requests;
  std::vector<double> timestamps;
  /// key -> grid point, in first-appearance order of keys.
  std::vector<std::pair<std::string, ObjectId>> assignment;
};

/// Maps trace keys injectively onto grid points: a seeded random permutation
/// (uniform) or popularity order along the spiral (spiral).
inline MappedTrace map_trace(std::span<const TraceRecord> trace, const TorusGrid& grid, TraceMapping mode,
                             std::uint64_t seed) {
  std::vector<std::string> order;
  if (mode == TraceMapping::spiral) {
    order = popularity_ranking(trace);
  } else {
    std::unordered_map<std::string, char> seen;
    for (const auto& r : trace)
      if (seen.try_emplace(r.key, 1).second) order.push_back(r.key);
  }
  if (order.size() > grid.size())
    throw ScaleGuardError("trace has " + std::to_string(order.size()) + " objects, grid holds " + std::to_string(grid.size()));
  std::vector<ObjectId> points;
  if (mode == TraceMapping::spiral) {
    points = spiral_order(grid);
  } else {
    points.resize(grid.size());
    std::iota(points.begin(), points.end(), ObjectId{0});
    std::mt19937_64 rng(seed);
    std::shuffle(points.begin(), points.end(), rng);
  }
  std::unordered_map<std::string, ObjectId> where;
  for (std::size_t i = 0; i < order.size(); ++i) where[order[i]] = points[i];

  MappedTrace out;
  std::unordered_map<std::string, char> listed;
  for (const auto& r : trace) {
    const ObjectId id = where.at(r.key);
    out.requests.push_back(id);
    out.timestamps.push_back(r.timestamp);
    if (listed.try_emplace(r.key, 1).second) out.assignment.emplace_back(r.key, id);
  }
  return out;
}

/// Feature-vector trace as a finite catalog of points (ids in first-appearance order).
struct EmbeddedTrace {
  PointCloud space;
  std::vector<ObjectId> requests;
  std::vector<std::string> keys;
};

inline EmbeddedTrace embed_trace(std::span<const TraceRecord> trace, int norm = 2, double gamma = 1.0) {
  if (trace.empty()) throw ConfigError("empty trace");
  const std::size_t dim = trace.front().features.size();
  if (dim == 0) throw ConfigError("trace has no feature columns");
  std::unordered_map<std::string, ObjectId> id;
  std::vector<double> coords;
  EmbeddedTrace out;
  for (const auto& r : trace) {
    auto [it, fresh] = id.try_emplace(r.key, static_cast<ObjectId>(out.keys.size()));
    if (fresh) {
      out.keys.push_back(r.key);
      coords.insert(coords.end(), r.features.begin(), r.features.end());
    }
    out.requests.push_back(it->second);
  }
  out.space = PointCloud(dim, std::move(coords), norm, gamma);
  return out;
}

/// Empirical request frequencies over a catalog, normalized to sum 1.
inline PopularityField empirical_rates(std::span<const ObjectId> requests, std::size_t catalog) {
  std::vector<PopularityField::Entry> e;
  e.reserve(requests.size());
  const double w = 1.0 / static_cast<double>(std::max<std::size_t>(requests.size(), 1));
  for (ObjectId r : requests) e.emplace_back(r, w);
  return PopularityField::sparse(catalog, std::move(e));
}

// ---------------------------------------------------------------------------
// Rank correlation.

/// Kendall tau-b between two score vectors over the same items (ties allowed),
/// O(n log n). NaN when either vector is constant.
inline double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rankings differ in length");
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("empty ranking");
  std::vector<std::pair<double, double>> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {a[i], b[i]};
  std::sort(p.begin(), p.end());

  auto tie_pairs = [](std::uint64_t run) { return run * (run - 1) / 2; };
  std::uint64_t n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && p[j].first == p[i].first) ++j;
    n1 += tie_pairs(j - i);
    for (std::size_t s = i; s < j;) {
      std::size_t e = s;
      while (e < j && p[e].second == p[s].second) ++e;
      n3 += tie_pairs(e - s);
      s = e;
    }
    i = j;
  }

  // Strict inversions in the second coordinate by merge sort.
  std::vector<double> v(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = p[i].second;
  std::uint64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += mid - i;
          tmp[k++] = v[j++];
        } else {
          tmp[k++] = v[i++];
        }
      }
      while (i < mid) tmp[k++] = v[i++];
      while (j < hi) tmp[k++] = v[j++];
    }
    std::swap(v, tmp);
  }
  std::uint64_t n2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && v[j] == v[i]) ++j;
    n2 += tie_pairs(j - i);
    i = j;
  }
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double num = n0 - static_cast<double>(n1) - static_cast<double>(n2) + static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double den = std::sqrt((n0 - static_cast<double>(n1)) * (n0 - static_cast<double>(n2)));
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

/// Tau-b between the popularity of each object in the first and second half
/// of the trace, over all objects seen in either half (absent = count 0).
inline double popularity_drift(std::span<const TraceRecord> trace) {
  if (trace.size() < 2) throw std::invalid_argument("need at least two records");
  const std::size_t half = trace.size() / 2;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> first, second;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto [it, fresh] = index.try_emplace(trace[i].key, first.size());
    if (fresh) {
      first.push_back(0.0);
      second.push_back(0.0);
    }
    (i < half ? first : second)[it->second] += 1.0;
  }
  return kendall_tau_b(first, second);
}

}  // namespace simcache
