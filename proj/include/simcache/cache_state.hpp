#pragma once

#include "simcache/space.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace simcache {

/// The k objects held by the cache, stored in fixed slots, plus a queue order
/// over the slots (front = most recently refreshed) for the LRU family.
///
/// For discrete catalogs membership is an O(1) lookup into a dense index;
/// continuous points fall back to a scan over the k slots.
template <class Obj>
class CacheState {
 public:
  static constexpr std::uint32_t npos = UINT32_MAX;

  CacheState() = default;

  /// `catalog_size` sizes the membership index for discrete catalogs and is
  /// ignored for continuous points. The queue starts in `initial` order.
  explicit CacheState(std::vector<Obj> initial, std::size_t catalog_size = 0) : slots_(std::move(initial)) {
    if (slots_.empty()) throw std::invalid_argument("cache state must hold at least one object");
    if constexpr (std::is_same_v<Obj, ObjectId>) {
      index_.assign(catalog_size, npos);
      for (std::uint32_t s = 0; s < slots_.size(); ++s) {
        if (slots_[s] >= catalog_size) throw std::out_of_range("initial object outside catalog");
        if (index_[slots_[s]] != npos) throw std::invalid_argument("initial cache contents must be distinct");
        index_[slots_[s]] = s;
      }
    } else {
      for (std::size_t a = 0; a < slots_.size(); ++a)
        for (std::size_t b = a + 1; b < slots_.size(); ++b)
          if (slots_[a] == slots_[b]) throw std::invalid_argument("initial cache contents must be distinct");
    }
    const auto k = static_cast<std::uint32_t>(slots_.size());
    prev_.resize(k);
    next_.resize(k);
    for (std::uint32_t s = 0; s < k; ++s) {
      prev_[s] = s == 0 ? npos : s - 1;
      next_[s] = s + 1 == k ? npos : s + 1;
    }
    head_ = 0;
    tail_ = k - 1;
  }

  std::size_t size() const noexcept { return slots_.size(); }
  const Obj& operator[](std::size_t slot) const noexcept { return slots_[slot]; }
  std::span<const Obj> contents() const noexcept { return slots_; }

  std::optional<std::uint32_t> slot_of(const Obj& x) const noexcept {
    if constexpr (std::is_same_v<Obj, ObjectId>) {
      if (x >= index_.size() || index_[x] == npos) return std::nullopt;
      return index_[x];
    } else {
      for (std::uint32_t s = 0; s < slots_.size(); ++s)
        if (slots_[s] == x) return s;
      return std::nullopt;
    }
  }
  bool contains(const Obj& x) const noexcept { return slot_of(x).has_value(); }

  /// Put `x` in `slot`, discarding the previous occupant. Queue position is unchanged.
  void replace(std::uint32_t slot, Obj x) {
    if (contains(x)) throw std::logic_error("object already cached");
    if constexpr (std::is_same_v<Obj, ObjectId>) {
      index_[slots_[slot]] = npos;
      index_[x] = slot;
    }
    slots_[slot] = std::move(x);
  }

  // -- queue order ---------------------------------------------------------

  std::uint32_t front_slot() const noexcept { return head_; }
  std::uint32_t back_slot() const noexcept { return tail_; }

  void move_to_front(std::uint32_t slot) noexcept {
    if (slot == head_) return;
    unlink(slot);
    prev_[slot] = npos;
    next_[slot] = head_;
    prev_[head_] = slot;
    head_ = slot;
  }

  /// Objects from front to back.
  std::vector<Obj> queue() const {
    std::vector<Obj> out;
    out.reserve(slots_.size());
    for (std::uint32_t s = head_; s != npos; s = next_[s]) out.push_back(slots_[s]);
    return out;
  }

  /// Sorted copy of the contents (canonical set representation).
  std::vector<Obj> sorted() const {
    std::vector<Obj> out(slots_.begin(), slots_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Contents are distinct and the queue is a permutation of the slots.
  bool consistent() const {
    std::vector<Obj> s = sorted();
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) return false;
    std::vector<bool> seen(slots_.size(), false);
    std::size_t n = 0;
    for (std::uint32_t cur = head_; cur != npos; cur = next_[cur]) {
      if (cur >= slots_.size() || seen[cur]) return false;
      seen[cur] = true;
      ++n;
    }
    if (n != slots_.size()) return false;
    if constexpr (std::is_same_v<Obj, ObjectId>) {
      for (std::uint32_t slot = 0; slot < slots_.size(); ++slot)
        if (index_[slots_[slot]] != slot) return false;
    }
    return true;
  }

 private:
  void unlink(std::uint32_t slot) noexcept {
    std::uint32_t p = prev_[slot], n = next_[slot];
    if (p != npos) next_[p] = n; else head_ = n;
    if (n != npos) prev_[n] = p; else tail_ = p;
  }

  std::vector<Obj> slots_;
  std::vector<std::uint32_t> index_;
  std::vector<std::uint32_t> prev_, next_;
  std::uint32_t head_ = npos, tail_ = npos;
};

}  // namespace simcache
