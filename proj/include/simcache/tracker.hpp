#pragma once

#include "simcache/cache_state.hpp"
#include "simcache/costs.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace simcache {

/// Expected cost of a cache state under known request rates, maintained
/// incrementally across single-object swaps.
///
/// For every object with a positive rate the tracker keeps its best and
/// runner-up approximator in the cache. With those, the cost change of
/// inserting x and evicting the object in slot s is
///
///   delta(x, s) = gain(x) + loss(s) - overlap(x, s)
///
/// where gain(x) <= 0 sums the improvement x brings to objects it would serve
/// better, loss(s) = C(S \ {y_s}) - C(S) is maintained per slot, and
/// overlap(x, s) corrects loss(s) for objects whose best approximator is y_s
/// but that x would serve at least as well as their runner-up. Both gain and
/// overlap only involve objects z with C(z, x) < C(z, S \ {best(z)}), so on
/// the torus grid only a diamond around x is scanned.
///
/// The service cost must be finite (finite chi).
template <DiscreteSpace S>
class IncrementalCost {
 public:
  IncrementalCost(const S& space, const CostModel& cm, const PopularityField& rates, std::span<const ObjectId> cache)
      : space_(&space), chi_(cm.chi().value()), slots_(cache.begin(), cache.end()) {
    if (cm.chi().is_infinite()) throw std::invalid_argument("incremental expected cost requires a finite chi");
    if (rates.catalog_size() != space.size()) throw std::invalid_argument("popularity field does not match catalog");
    if (slots_.empty()) throw std::invalid_argument("empty cache state");
    support_index_.assign(space.size(), kNone);
    rates.for_each([&](ObjectId x, double r) {
      support_index_[x] = static_cast<std::uint32_t>(objects_.size());
      objects_.push_back(x);
      rate_.push_back(r);
    });
    const std::size_t n = objects_.size();
    best_.resize(n);
    second_slot_.resize(n);
    c1_.resize(n);
    c2_.resize(n);
    loss_.assign(slots_.size(), 0.0);
    overlap_.assign(slots_.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      rescan(i);
      second_costs_.insert(c2_[i]);
    }
    resync();
  }

  std::span<const ObjectId> slots() const noexcept { return slots_; }

  /// Maintained expected cost C(S).
  double total() const noexcept { return total_; }

  /// C(S) recomputed from the per-object bookkeeping (no drift).
  double exact_total() const {
    double t = 0.0;
    for (std::size_t i = 0; i < objects_.size(); ++i) t += rate_[i] * cap(c1_[i]);
    return t;
  }

  /// Slot and raw cost of the best cached approximator of x, for objects
  /// with a positive rate.
  std::optional<std::pair<std::uint32_t, double>> best_of(ObjectId x) const {
    if (x >= support_index_.size() || support_index_[x] == kNone) return std::nullopt;
    const std::uint32_t i = support_index_[x];
    return std::pair{best_[i], c1_[i]};
  }

  /// C(S \ {slot object}) - C(S) >= 0.
  double removal_loss(std::uint32_t slot) const noexcept { return loss_[slot]; }

  /// delta(x, s) for every slot s, written to `out` (resized to k).
  /// `x` must not be cached.
  void evaluate_insert(ObjectId x, std::vector<double>& out) {
    double gain = 0.0;
    touched_.clear();
    for_each_affected(x, [&](std::uint32_t i, double a_raw) {
      const double a = cap(a_raw), C1 = cap(c1_[i]), C2 = cap(c2_[i]);
      if (!(a < C2)) return;
      if (a < C1) gain += rate_[i] * (a - C1);
      const std::uint32_t s = best_[i];
      if (overlap_[s] == 0.0) touched_.push_back(s);
      overlap_[s] += rate_[i] * (C2 - std::max(a, C1));
    });
    out.resize(slots_.size());
    for (std::size_t s = 0; s < slots_.size(); ++s) out[s] = gain + loss_[s] - overlap_[s];
    for (std::uint32_t s : touched_) overlap_[s] = 0.0;
  }

  double delta(ObjectId insert, std::uint32_t evict_slot) {
    evaluate_insert(insert, scratch_);
    return scratch_[evict_slot];
  }

  /// Replace the object in `slot` by `x` and update all bookkeeping.
  void apply_swap(std::uint32_t slot, ObjectId x) {
    if (std::find(slots_.begin(), slots_.end(), x) != slots_.end()) throw std::logic_error("object already cached");
    const ObjectId evicted = slots_[slot];
    const double reach = max_second_raw();
    slots_[slot] = x;
    ++epoch_;
    // Objects that relied on the evicted object as best or runner-up.
    for_each_near(evicted, reach, [&](std::uint32_t i) {
      if (best_[i] == slot || second_slot_[i] == slot) {
        update(i, [&] { rescan(i); });
        stamp_[i] = epoch_;
      }
    });
    // Objects for which x enters the top two.
    for_each_near(x, reach, [&](std::uint32_t i) {
      if (stamp_[i] == epoch_) return;
      const double a = space_->raw(objects_[i], x);
      update(i, [&] { offer(i, slot, a); });
    });
    if (++swaps_since_resync_ >= kResyncInterval) resync();
  }

  /// Recompute the maintained sums exactly from the per-object bookkeeping.
  void resync() {
    std::fill(loss_.begin(), loss_.end(), 0.0);
    for (std::size_t i = 0; i < objects_.size(); ++i) loss_[best_[i]] += rate_[i] * (cap(c2_[i]) - cap(c1_[i]));
    total_ = exact_total();
    swaps_since_resync_ = 0;
  }

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  static constexpr int kResyncInterval = 512;

  double cap(double v) const noexcept { return v < chi_ ? v : chi_; }

  double max_second_raw() const noexcept { return second_costs_.empty() ? chi_ : *second_costs_.rbegin(); }

  /// Full top-two scan of object i over the current slots.
  void rescan(std::size_t i) {
    const ObjectId z = objects_[i];
    double c1 = std::numeric_limits<double>::infinity(), c2 = c1;
    std::uint32_t b1 = kNone, b2 = kNone;
    for (std::uint32_t s = 0; s < slots_.size(); ++s) {
      const double c = space_->raw(z, slots_[s]);
      if (b1 == kNone || c < c1 || (c == c1 && slots_[s] < slots_[b1])) {
        c2 = c1;
        b2 = b1;
        c1 = c;
        b1 = s;
      } else if (b2 == kNone || c < c2 || (c == c2 && slots_[s] < slots_[b2])) {
        c2 = c;
        b2 = s;
      }
    }
    best_[i] = b1;
    second_slot_[i] = b2;
    c1_[i] = c1;
    c2_[i] = c2;
  }

  /// Offer (a, slot) as a candidate to the top two of object i.
  void offer(std::size_t i, std::uint32_t slot, double a) {
    const ObjectId id = slots_[slot];
    auto less = [&](double ca, ObjectId ia, double cb, std::uint32_t sb) {
      return sb == kNone || ca < cb || (ca == cb && ia < slots_[sb]);
    };
    if (less(a, id, c1_[i], best_[i])) {
      c2_[i] = c1_[i];
      second_slot_[i] = best_[i];
      c1_[i] = a;
      best_[i] = slot;
    } else if (less(a, id, c2_[i], second_slot_[i])) {
      c2_[i] = a;
      second_slot_[i] = slot;
    }
  }

  /// Apply a bookkeeping change to object i, keeping sums and the runner-up
  /// multiset in step.
  template <class Change>
  void update(std::size_t i, Change&& change) {
    const std::uint32_t old_best = best_[i];
    const double old_c1 = c1_[i], old_c2 = c2_[i];
    change();
    if (old_best == best_[i] && old_c1 == c1_[i] && old_c2 == c2_[i]) return;
    const double r = rate_[i];
    loss_[old_best] -= r * (cap(old_c2) - cap(old_c1));
    loss_[best_[i]] += r * (cap(c2_[i]) - cap(c1_[i]));
    total_ += r * (cap(c1_[i]) - cap(old_c1));
    if (old_c2 != c2_[i]) {
      second_costs_.erase(second_costs_.find(old_c2));
      second_costs_.insert(c2_[i]);
    }
  }

  /// Objects z (by support index) with C(z, x) possibly below cap(c2(z)),
  /// passed with their raw cost C(z, x).
  template <class Fn>
  void for_each_affected(ObjectId x, Fn&& fn) {
    const double bound = std::min(max_second_raw(), chi_);
    if constexpr (std::is_same_v<S, TorusGrid>) {
      int radius = -1;
      while (radius + 1 <= space_->max_hops() && space_->cost_at(radius + 1) < bound) ++radius;
      space_->for_each_within(x, radius, [&](ObjectId z, int hops) {
        const std::uint32_t i = support_index_[z];
        if (i != kNone) fn(i, space_->cost_at(hops));
      });
    } else {
      for (std::uint32_t i = 0; i < objects_.size(); ++i) {
        const double a = space_->raw(objects_[i], x);
        if (a < bound) fn(i, a);
      }
    }
  }

  /// Objects z with C(z, center) <= reach (a superset on non-grid spaces).
  template <class Fn>
  void for_each_near(ObjectId center, double reach, Fn&& fn) {
    if (stamp_.size() != objects_.size()) stamp_.assign(objects_.size(), 0);
    if constexpr (std::is_same_v<S, TorusGrid>) {
      int radius = -1;
      while (radius + 1 <= space_->max_hops() && space_->cost_at(radius + 1) <= reach) ++radius;
      space_->for_each_within(center, radius, [&](ObjectId z, int) {
        const std::uint32_t i = support_index_[z];
        if (i != kNone) fn(i);
      });
    } else {
      for (std::uint32_t i = 0; i < objects_.size(); ++i) fn(i);
    }
  }

  const S* space_;
  double chi_;
  std::vector<ObjectId> slots_;

  std::vector<ObjectId> objects_;
  std::vector<double> rate_;
  std::vector<std::uint32_t> support_index_;
  std::vector<std::uint32_t> best_, second_slot_;
  std::vector<double> c1_, c2_;
  std::multiset<double> second_costs_;

  std::vector<double> loss_;
  std::vector<double> overlap_;
  std::vector<std::uint32_t> touched_;
  std::vector<double> scratch_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t epoch_ = 0;
  double total_ = 0.0;
  int swaps_since_resync_ = 0;
};

}  // namespace simcache
