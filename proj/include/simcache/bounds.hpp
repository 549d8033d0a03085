#pragma once

#include "simcache/costs.hpp"
#include "simcache/space.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace simcache {

// ---------------------------------------------------------------------------
// Ball cost F(v): the cost of serving a unit-density ball of volume v from its
// center, with C_a = h(distance) capped at the retrieval cost.

struct BallCostFn {
  enum class Mode { automatic, closed_form, quadrature };

  int norm = 1;
  int dim = 2;
  double gamma = 1.0;
  /// Cap on the per-point cost; infinity for the uncapped form.
  double retrieval = std::numeric_limits<double>::infinity();
  Mode mode = Mode::automatic;

  void validate() const {
    if (norm != 1 && norm != 2) throw std::invalid_argument("norm must be 1 or 2");
    if (dim < 1) throw std::invalid_argument("dimension must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("cost exponent must be positive");
    if (!(retrieval > 0.0)) throw std::invalid_argument("retrieval cost must be positive");
  }

  bool closed_form_available() const { return dim == 2 && norm == 1; }

  bool uses_closed_form() const {
    if (mode == Mode::closed_form) {
      if (!closed_form_available()) throw std::invalid_argument("closed form needs dim 2 and norm 1");
      return true;
    }
    return mode == Mode::automatic && closed_form_available();
  }

  /// Volume of the unit ball of the norm.
  double unit_ball_volume() const {
    const double p = dim;
    if (norm == 1) return std::pow(2.0, p) / std::tgamma(p + 1.0);
    return std::pow(std::numbers::pi, p / 2.0) / std::tgamma(p / 2.0 + 1.0);
  }

  /// Distance at which the cost reaches the cap.
  double cap_radius() const { return std::isinf(retrieval) ? retrieval : std::pow(retrieval, 1.0 / gamma); }

  double operator()(double v) const {
    validate();
    if (!(v >= 0.0)) throw std::invalid_argument("volume must be non-negative");
    if (v == 0.0) return 0.0;
    return uses_closed_form() ? closed(v) : quadrature(v);
  }

 private:
  double closed(double v) const {
    const double g2 = gamma + 2.0;
    const double r = std::sqrt(v / 2.0);
    const double dbar = cap_radius();
    if (r <= dbar) return 4.0 * std::pow(r, g2) / g2;
    return 4.0 * std::pow(dbar, g2) / g2 + retrieval * (v - 2.0 * dbar * dbar);
  }

  double quadrature(double v) const {
    using boost::math::quadrature::gauss_kronrod;
    const double v1 = unit_ball_volume();
    const double R = std::pow(v / v1, 1.0 / dim);
    const double dbar = cap_radius();
    const double p = dim;
    auto uncapped = [&](double rho) { return std::pow(rho, gamma + p - 1.0); };
    const double split = std::min(R, dbar);
    double integral = gauss_kronrod<double, 61>::integrate(uncapped, 0.0, split, 15, 1e-12);
    if (R > dbar) integral += retrieval * (std::pow(R, p) - std::pow(dbar, p)) / p;
    return p * v1 * integral;
  }
};

/// Lower bound on the expected cost of k objects under a homogeneous rate
/// density `rate` over a domain of volume `volume`: rate * k * F(volume / k).
inline double lower_bound(const BallCostFn& fn, double rate, double volume, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (!(rate >= 0.0) || !(volume > 0.0)) throw std::invalid_argument("rate and volume must be non-negative");
  return rate * static_cast<double>(k) * fn(volume / static_cast<double>(k));
}

// ---------------------------------------------------------------------------
// Tessellations of the torus grid.

struct TessellationCertificate {
  bool tessellation = false;
  /// Common ball radius in hops (-1 when no radius fits |S|).
  int radius = -1;
  std::size_t uncovered = 0;
  std::size_t overcovered = 0;
  /// Owning center per grid point (valid when `tessellation`).
  std::vector<ObjectId> owner;
};

/// True iff equal-radius diamonds around S cover every grid point exactly once.
inline TessellationCertificate certify_tessellation(const TorusGrid& grid, std::span<const ObjectId> centers) {
  TessellationCertificate cert;
  const std::size_t n = grid.size();
  if (centers.empty()) return cert;
  for (int r = 0; 2 * r + 1 <= grid.side(); ++r) {
    if (TorusGrid::ball_size(r) * centers.size() == n) {
      cert.radius = r;
      break;
    }
  }
  if (cert.radius < 0) {
    cert.uncovered = n;
    return cert;
  }
  std::vector<std::uint32_t> count(n, 0);
  cert.owner.assign(n, 0);
  for (ObjectId c : centers) {
    if (c >= n) throw std::out_of_range("center outside grid");
    grid.for_each_within(c, cert.radius, [&](ObjectId z, int) {
      ++count[z];
      cert.owner[z] = c;
    });
  }
  for (std::uint32_t c : count) {
    if (c == 0) ++cert.uncovered;
    if (c > 1) ++cert.overcovered;
  }
  cert.tessellation = cert.uncovered == 0 && cert.overcovered == 0;
  if (!cert.tessellation) cert.owner.clear();
  return cert;
}

/// Centers of the perfect diamond tessellation of the L = 1 + 2l(l+1) torus:
/// the lattice generated by (l, l+1), one center per column.
inline std::vector<ObjectId> tessellation_centers(const TorusGrid& grid, int l) {
  if (l < 1) throw std::invalid_argument("l must be positive");
  const long L = 1 + 2L * l * (l + 1);
  if (grid.side() != L) throw std::invalid_argument("grid side does not match 1 + 2l(l+1)");
  // c * l == l + 1 (mod L); l is invertible since gcd(l, L) = 1.
  long inv = 1;
  for (long a = 1; a < L; ++a)
    if ((a * l) % L == 1) inv = a;
  const long c = ((l + 1) * inv) % L;
  std::vector<ObjectId> out;
  out.reserve(static_cast<std::size_t>(L));
  for (long row = 0; row < L; ++row) out.push_back(grid.id(static_cast<int>(row), static_cast<int>((c * row) % L)));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Lagrange approximation of the minimum expected cost for a rate field.

struct ApproxMinCost {
  double value = 0.0;
  /// Rate threshold below which regions get no cache slot (0 when all do).
  double threshold = 0.0;
  bool all_covered = true;
};

inline double zeta(double gamma) { return std::pow(2.0, (2.0 - gamma) / 2.0) / (gamma + 2.0); }

/// `rates` are rate densities on cells of volume `cell_volume` in the plane
/// with norm-1 costs h(d) = d^gamma. `retrieval` may be infinite.
inline ApproxMinCost approx_min_cost(std::span<const double> rates, double cell_volume, std::size_t k, double gamma,
                                     double retrieval) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("cost exponent must be positive");
  if (!(cell_volume > 0.0)) throw std::invalid_argument("cell volume must be positive");
  const double a = 2.0 / (gamma + 2.0);
  const double kk = static_cast<double>(k);
  auto integral_above = [&](double thr) {
    double s = 0.0;
    for (double r : rates)
      if (r > thr) s += std::pow(r, a) * cell_volume;
    return s;
  };
  auto mass_below = [&](double thr) {
    double s = 0.0;
    for (double r : rates)
      if (r > 0.0 && r <= thr) s += r * cell_volume;
    return s;
  };
  auto value_at = [&](double thr) {
    return zeta(gamma) * std::pow(kk, -gamma / 2.0) * std::pow(integral_above(thr), (gamma + 2.0) / 2.0) +
           (std::isinf(retrieval) ? 0.0 : retrieval * mass_below(thr));
  };

  ApproxMinCost out;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double r : rates) {
    if (r < 0.0) throw std::invalid_argument("rates must be non-negative");
    if (r > 0.0) lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (!(hi > 0.0)) throw std::invalid_argument("rate field is zero");
  if (std::isinf(retrieval)) {
    out.value = value_at(0.0);
    return out;
  }
  const double kbar = 1.0 / (2.0 * std::pow(retrieval, 2.0 / gamma));
  auto g = [&](double thr) { return kk * std::pow(thr, a) - kbar * integral_above(thr); };
  lo *= (1.0 - 1e-6);
  if (g(lo) >= 0.0) {
    out.value = value_at(0.0);
    return out;
  }
  for (int it = 0; it < 200 && hi > lo; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) >= 0.0) hi = mid;
    else lo = mid;
  }
  out.threshold = hi;
  out.all_covered = false;
  out.value = value_at(hi);
  return out;
}

// ---------------------------------------------------------------------------

struct ConvexityReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  /// Largest (F(v_a) - (a F(v1) + (1-a) F(v2))) / max(1, |rhs|) seen.
  double max_violation = 0.0;
  double tolerance = 0.0;
};

/// Checks a F(v1) + (1 - a) F(v2) >= F(a v1 + (1 - a) v2) over all volume
/// pairs and a in {0.1, ..., 0.9}. Tolerance: 1e-9 relative for closed forms,
/// 1e-6 relative for quadrature.
inline ConvexityReport convexity_probe(const BallCostFn& fn, std::span<const double> volumes) {
  ConvexityReport rep;
  rep.tolerance = fn.uses_closed_form() ? 1e-9 : 1e-6;
  std::vector<double> f(volumes.size());
  for (std::size_t i = 0; i < volumes.size(); ++i) f[i] = fn(volumes[i]);
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    for (std::size_t j = i + 1; j < volumes.size(); ++j) {
      for (int step = 1; step <= 9; ++step) {
        const double al = step / 10.0;
        const double rhs = al * f[i] + (1.0 - al) * f[j];
        const double lhs = fn(al * volumes[i] + (1.0 - al) * volumes[j]);
        const double viol = (lhs - rhs) / std::max(1.0, std::abs(rhs));
        rep.max_violation = std::max(rep.max_violation, viol);
        if (viol > rep.tolerance) ++rep.violations;
        ++rep.checks;
      }
    }
  }
  return rep;
}

}  // namespace simcache
