#pragma once

#include "simcache/cost.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simcache {

using ObjectId = std::uint32_t;

/// h(d) = d^gamma with h(0) = 0, including gamma = 0.
struct PowerLaw {
  double gamma = 1.0;

  double operator()(double d) const noexcept {
    if (d <= 0.0) return 0.0;
    if (gamma == 1.0) return d;
    return std::pow(d, gamma);
  }

  /// inf{d : h(d) >= c}; infinite when no distance reaches c.
  double radius_for(double c) const noexcept {
    if (c <= 0.0) return 0.0;
    if (std::isinf(c)) return std::numeric_limits<double>::infinity();
    if (gamma == 0.0) return c <= 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::pow(c, 1.0 / gamma);
  }
};

// ---------------------------------------------------------------------------
// Finite catalog with an explicit cost matrix.

class FiniteSpace {
 public:
  using object_type = ObjectId;

  FiniteSpace() = default;

  /// Row-major |X| x |X| matrix; entry (x, y) is the cost to approximate x with y.
  FiniteSpace(std::size_t n, std::vector<double> costs) : n_(n), costs_(std::move(costs)) {
    if (costs_.size() != n_ * n_) throw std::invalid_argument("cost matrix must be square");
    for (std::size_t x = 0; x < n_; ++x) {
      for (std::size_t y = 0; y < n_; ++y) {
        double c = costs_[x * n_ + y];
        if (!(c >= 0.0)) throw std::invalid_argument("approximation costs must be non-negative");
        if (x == y && c != 0.0) throw std::invalid_argument("cost matrix diagonal must be zero");
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

  Cost approx_cost(ObjectId x, ObjectId y) const {
    check(x);
    check(y);
    return Cost{raw(x, y)};
  }

  /// Unchecked access for inner loops.
  double raw(ObjectId x, ObjectId y) const noexcept { return costs_[std::size_t{x} * n_ + y]; }

  std::span<const double> matrix() const noexcept { return costs_; }

 private:
  void check(ObjectId x) const {
    if (x >= n_) throw std::out_of_range("object id " + std::to_string(x) + " outside catalog of size " + std::to_string(n_));
  }

  std::size_t n_ = 0;
  std::vector<double> costs_;
};

// ---------------------------------------------------------------------------
// L x L grid with wrap-around; objects are numbered row-major.

struct GridPoint {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

class TorusGrid {
 public:
  using object_type = ObjectId;

  TorusGrid() = default;
  TorusGrid(int side, double gamma) : side_(side), h_{gamma} {
    if (side < 1) throw std::invalid_argument("grid side must be positive");
    if (!(gamma >= 0.0)) throw std::invalid_argument("cost exponent must be non-negative");
    table_.resize(static_cast<std::size_t>(side) + 1);
    for (int d = 0; d <= side; ++d) table_[d] = h_(d);
  }

  int side() const noexcept { return side_; }
  double gamma() const noexcept { return h_.gamma; }
  const PowerLaw& cost_fn() const noexcept { return h_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(side_) * side_; }

  ObjectId id(int row, int col) const noexcept {
    return static_cast<ObjectId>(wrap(row) * side_ + wrap(col));
  }
  ObjectId id(GridPoint p) const noexcept { return id(p.row, p.col); }
  GridPoint point(ObjectId x) const noexcept { return {static_cast<int>(x / side_), static_cast<int>(x % side_)}; }
  GridPoint center() const noexcept { return {(side_ - 1) / 2, (side_ - 1) / 2}; }

  int wrap(int v) const noexcept {
    int r = v % side_;
    return r < 0 ? r + side_ : r;
  }

  int axis_distance(int a, int b) const noexcept {
    int d = std::abs(a - b) % side_;
    return std::min(d, side_ - d);
  }

  /// Minimum-hop distance with wrap-around.
  int hops(ObjectId x, ObjectId y) const noexcept {
    GridPoint p = point(x), q = point(y);
    return axis_distance(p.row, q.row) + axis_distance(p.col, q.col);
  }
  double distance(ObjectId x, ObjectId y) const noexcept { return hops(x, y); }

  /// Largest hop distance between two grid points.
  int max_hops() const noexcept { return 2 * (side_ / 2); }

  Cost approx_cost(ObjectId x, ObjectId y) const {
    if (x >= size() || y >= size()) throw std::out_of_range("grid object id out of range");
    return Cost{table_[hops(x, y)]};
  }
  double raw(ObjectId x, ObjectId y) const noexcept { return table_[hops(x, y)]; }
  double cost_at(int hops) const noexcept { return table_[hops]; }

  /// inf{d : h(d) >= c} for the metric-space interface.
  double radius_for(double c) const noexcept { return h_.radius_for(c); }

  /// Visit every grid point within `radius` hops of `center` exactly once,
  /// as fn(object, hops). Falls back to a full scan when the diamond wraps.
  template <class Fn>
  void for_each_within(ObjectId center, int radius, Fn&& fn) const {
    if (radius < 0) return;
    if (2 * radius + 1 > side_) {
      for (ObjectId z = 0; z < size(); ++z) {
        int d = hops(z, center);
        if (d <= radius) fn(z, d);
      }
      return;
    }
    GridPoint c = point(center);
    for (int dr = -radius; dr <= radius; ++dr) {
      int row = wrap(c.row + dr) * side_;
      int rem = radius - std::abs(dr);
      for (int dc = -rem; dc <= rem; ++dc) {
        fn(static_cast<ObjectId>(row + wrap(c.col + dc)), std::abs(dr) + std::abs(dc));
      }
    }
  }

  /// Number of grid points in a diamond of the given radius (no wrap).
  static std::size_t ball_size(int radius) noexcept {
    return 1 + 2 * static_cast<std::size_t>(radius) * (radius + 1);
  }

 private:
  int side_ = 1;
  PowerLaw h_{};
  std::vector<double> table_{0.0};
};

// ---------------------------------------------------------------------------
// Norm helpers for points in R^p.

inline double norm_distance(std::span<const double> a, std::span<const double> b, int q) {
  double acc = 0.0;
  if (q == 1) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Finite catalog of feature vectors, C_a(x, y) = h(||x - y||_q).
class PointCloud {
 public:
  using object_type = ObjectId;

  PointCloud() = default;
  PointCloud(std::size_t dim, std::vector<double> coords, int norm, double gamma)
      : dim_(dim), coords_(std::move(coords)), norm_(norm), h_{gamma} {
    if (dim_ == 0 || coords_.size() % dim_ != 0) throw std::invalid_argument("point cloud coordinates do not match dimension");
    if (norm != 1 && norm != 2) throw std::invalid_argument("norm must be 1 or 2");
    if (!(gamma >= 0.0)) throw std::invalid_argument("cost exponent must be non-negative");
  }

  std::size_t size() const noexcept { return dim_ ? coords_.size() / dim_ : 0; }
  std::size_t dim() const noexcept { return dim_; }
  int norm() const noexcept { return norm_; }
  const PowerLaw& cost_fn() const noexcept { return h_; }

  std::span<const double> point(ObjectId x) const noexcept { return {coords_.data() + std::size_t{x} * dim_, dim_}; }

  double distance(ObjectId x, ObjectId y) const noexcept { return norm_distance(point(x), point(y), norm_); }
  double raw(ObjectId x, ObjectId y) const noexcept { return x == y ? 0.0 : h_(distance(x, y)); }
  Cost approx_cost(ObjectId x, ObjectId y) const {
    if (x >= size() || y >= size()) throw std::out_of_range("point id out of range");
    return Cost{raw(x, y)};
  }
  double radius_for(double c) const noexcept { return h_.radius_for(c); }

 private:
  std::size_t dim_ = 1;
  std::vector<double> coords_;
  int norm_ = 2;
  PowerLaw h_{};
};

// ---------------------------------------------------------------------------
// Continuous box [0, extent]^p; objects are arbitrary points.

using Point = std::vector<double>;

class ContinuousSpace {
 public:
  using object_type = Point;

  ContinuousSpace() = default;
  ContinuousSpace(std::size_t dim, int norm, double gamma, double extent = 1.0)
      : dim_(dim), norm_(norm), h_{gamma}, extent_(extent) {
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    if (norm != 1 && norm != 2) throw std::invalid_argument("norm must be 1 or 2");
    if (!(gamma >= 0.0)) throw std::invalid_argument("cost exponent must be non-negative");
    if (!(extent > 0.0)) throw std::invalid_argument("extent must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  int norm() const noexcept { return norm_; }
  double extent() const noexcept { return extent_; }
  double volume() const noexcept { return std::pow(extent_, static_cast<double>(dim_)); }
  const PowerLaw& cost_fn() const noexcept { return h_; }

  bool contains(const Point& x) const noexcept {
    if (x.size() != dim_) return false;
    return std::all_of(x.begin(), x.end(), [&](double v) { return v >= 0.0 && v <= extent_; });
  }

  double distance(const Point& x, const Point& y) const noexcept { return norm_distance(x, y, norm_); }
  double raw(const Point& x, const Point& y) const noexcept { return h_(distance(x, y)); }
  Cost approx_cost(const Point& x, const Point& y) const {
    if (x.size() != dim_ || y.size() != dim_) throw std::invalid_argument("point dimension mismatch");
    return Cost{raw(x, y)};
  }
  double radius_for(double c) const noexcept { return h_.radius_for(c); }

 private:
  std::size_t dim_ = 2;
  int norm_ = 2;
  PowerLaw h_{};
  double extent_ = 1.0;
};

// ---------------------------------------------------------------------------

template <class S>
concept ObjectSpace = requires(const S& s, const typename S::object_type& x) {
  { s.approx_cost(x, x) } -> std::same_as<Cost>;
  { s.raw(x, x) } -> std::convertible_to<double>;
};

template <class S>
concept DiscreteSpace = ObjectSpace<S> && std::same_as<typename S::object_type, ObjectId> && requires(const S& s) {
  { s.size() } -> std::convertible_to<std::size_t>;
};

/// Spaces with a distance and a non-decreasing cost of that distance.
template <class S>
concept MetricSpace = ObjectSpace<S> && requires(const S& s, const typename S::object_type& x) {
  { s.distance(x, x) } -> std::convertible_to<double>;
  { s.radius_for(1.0) } -> std::convertible_to<double>;
};

}  // namespace simcache
