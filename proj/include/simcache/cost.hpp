#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace simcache {

/// Non-negative cost with an exact +infinity value.
///
/// Addition saturates at infinity and `0 * infinity` is defined as 0, so a
/// zero request rate never turns an unreachable object into a NaN.
class Cost {
 public:
  constexpr Cost() = default;
  constexpr explicit Cost(double v) : value_(v) {
    if (!(v >= 0.0)) throw std::invalid_argument("Cost must be non-negative");
  }

  static constexpr Cost infinite() noexcept {
    Cost c;
    c.value_ = std::numeric_limits<double>::infinity();
    return c;
  }
  static constexpr Cost zero() noexcept { return Cost{}; }

  constexpr bool is_infinite() const noexcept { return value_ == std::numeric_limits<double>::infinity(); }
  constexpr bool is_finite() const noexcept { return !is_infinite(); }
  constexpr double value() const noexcept { return value_; }

  constexpr Cost& operator+=(Cost o) noexcept {
    value_ = (is_infinite() || o.is_infinite()) ? std::numeric_limits<double>::infinity() : value_ + o.value_;
    return *this;
  }
  friend constexpr Cost operator+(Cost a, Cost b) noexcept { return a += b; }

  /// Weighted cost; the weight must be non-negative.
  friend constexpr Cost operator*(double w, Cost c) {
    if (!(w >= 0.0)) throw std::invalid_argument("cost weight must be non-negative");
    if (w == 0.0) return Cost{};
    Cost r;
    r.value_ = c.is_infinite() ? c.value_ : w * c.value_;
    return r;
  }
  friend constexpr Cost operator*(Cost c, double w) { return w * c; }

  /// Signed difference; throws when both sides are infinite.
  friend double operator-(Cost a, Cost b) {
    if (a.is_infinite() && b.is_infinite()) throw std::domain_error("difference of two infinite costs");
    return a.value_ - b.value_;
  }

  friend constexpr bool operator==(Cost a, Cost b) noexcept { return a.value_ == b.value_; }
  friend constexpr std::partial_ordering operator<=>(Cost a, Cost b) noexcept { return a.value_ <=> b.value_; }

  friend std::ostream& operator<<(std::ostream& os, Cost c) {
    if (c.is_infinite()) return os << "inf";
    return os << c.value_;
  }

 private:
  double value_ = 0.0;
};

constexpr Cost min(Cost a, Cost b) noexcept { return b < a ? b : a; }

/// Retrieval-cost structure, with the optional user/network split.
///
/// Without the split the cache pays `retrieval` per retrieval and a request can
/// always be served at that cost, so `chi() == retrieval`. With the split, a
/// retrieval costs `user + network`, and `chi()` is infinite when every
/// retrieved object must be stored.
class CostModel {
 public:
  CostModel() = default;
  explicit CostModel(double retrieval) : retrieval_(retrieval) {
    if (!(retrieval > 0.0) || std::isinf(retrieval)) throw std::invalid_argument("retrieval cost must be positive and finite");
  }

  static CostModel extended(double user, double network, bool require_store) {
    if (!(user >= 0.0) || !(network >= 0.0) || !(user + network > 0.0) || std::isinf(user + network))
      throw std::invalid_argument("user/network costs must be non-negative with a positive finite sum");
    CostModel m;
    m.retrieval_ = user + network;
    m.user_ = user;
    m.network_ = network;
    m.require_store_ = require_store;
    return m;
  }

  /// Cost paid for one retrieval (the finite branch of the movement cost).
  double retrieval() const noexcept { return retrieval_; }
  Cost chi() const noexcept { return require_store_ ? Cost::infinite() : Cost{retrieval_}; }

  bool extended() const noexcept { return user_.has_value(); }
  std::optional<double> user_cost() const noexcept { return user_; }
  std::optional<double> network_cost() const noexcept { return network_; }
  bool require_store() const noexcept { return require_store_; }

  /// Service cost given the best approximation cost available.
  Cost cap(Cost approx) const noexcept { return min(approx, chi()); }

 private:
  double retrieval_ = 1.0;
  std::optional<double> user_;
  std::optional<double> network_;
  bool require_store_ = false;
};

}  // namespace simcache
