#pragma once

#include "simcache/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace simcache {

/// Request rates over a discrete catalog: a dense array (grids) or a sorted
/// sparse list (traces, where most of the catalog is never requested).
class PopularityField {
 public:
  using Entry = std::pair<ObjectId, double>;

  PopularityField() = default;

  static PopularityField dense(std::vector<double> rates) {
    for (double r : rates)
      if (!(r >= 0.0) || std::isinf(r)) throw std::invalid_argument("rates must be finite and non-negative");
    PopularityField f;
    f.catalog_ = rates.size();
    f.data_ = std::move(rates);
    return f;
  }

  static PopularityField uniform(std::size_t catalog) {
    if (catalog == 0) throw std::invalid_argument("empty catalog");
    return dense(std::vector<double>(catalog, 1.0 / static_cast<double>(catalog)));
  }

  /// Duplicate ids are summed.
  static PopularityField sparse(std::size_t catalog, std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end());
    std::vector<Entry> merged;
    for (const auto& [id, r] : entries) {
      if (id >= catalog) throw std::out_of_range("rate entry outside catalog");
      if (!(r >= 0.0) || std::isinf(r)) throw std::invalid_argument("rates must be finite and non-negative");
      if (!merged.empty() && merged.back().first == id) merged.back().second += r;
      else merged.emplace_back(id, r);
    }
    PopularityField f;
    f.catalog_ = catalog;
    f.data_ = std::move(merged);
    return f;
  }

  std::size_t catalog_size() const noexcept { return catalog_; }
  bool is_dense() const noexcept { return std::holds_alternative<std::vector<double>>(data_); }

  double rate(ObjectId x) const {
    if (x >= catalog_) throw std::out_of_range("object outside catalog");
    if (const auto* d = std::get_if<std::vector<double>>(&data_)) return (*d)[x];
    const auto& s = std::get<std::vector<Entry>>(data_);
    auto it = std::lower_bound(s.begin(), s.end(), Entry{x, -1.0});
    return (it != s.end() && it->first == x) ? it->second : 0.0;
  }

  /// Visits every object with a positive rate, in increasing id order.
  template <class Fn>
  void for_each(Fn&& fn) const {
    if (const auto* d = std::get_if<std::vector<double>>(&data_)) {
      for (std::size_t x = 0; x < d->size(); ++x)
        if ((*d)[x] > 0.0) fn(static_cast<ObjectId>(x), (*d)[x]);
    } else {
      for (const auto& [x, r] : std::get<std::vector<Entry>>(data_))
        if (r > 0.0) fn(x, r);
    }
  }

  double total() const {
    double t = 0.0;
    for_each([&](ObjectId, double r) { t += r; });
    return t;
  }

  std::size_t support_size() const {
    std::size_t n = 0;
    for_each([&](ObjectId, double) { ++n; });
    return n;
  }

  /// Same field scaled to total rate 1.
  PopularityField normalized() const {
    double t = total();
    if (!(t > 0.0)) throw std::invalid_argument("popularity field has zero total rate");
    PopularityField f = *this;
    if (auto* d = std::get_if<std::vector<double>>(&f.data_)) {
      for (double& r : *d) r /= t;
    } else {
      for (auto& e : std::get<std::vector<Entry>>(f.data_)) e.second /= t;
    }
    return f;
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(catalog_, 0.0);
    for_each([&](ObjectId x, double r) { out[x] = r; });
    return out;
  }

 private:
  std::size_t catalog_ = 0;
  std::variant<std::vector<double>, std::vector<Entry>> data_;
};

}  // namespace simcache
