#pragma once

#include <cstdint>
#include <vector>

namespace acm {

// Binary indexed tree over 0/1 membership flags: prefix counts and
// k-th member lookup in O(log n).
class FenwickSet {
 public:
  FenwickSet() = default;
  explicit FenwickSet(std::size_t capacity) { reserve(capacity); }

  std::size_t capacity() const noexcept { return flags_.size(); }
  std::int64_t size() const noexcept { return size_; }
  bool contains(std::size_t i) const { return i < flags_.size() && flags_[i] != 0; }

  // Grows to hold at least n positions; rebuilds the tree in O(n).
  void reserve(std::size_t n) {
    if (n <= flags_.size()) return;
    std::size_t cap = flags_.empty() ? 1 : flags_.size();
    while (cap < n) cap *= 2;
    flags_.resize(cap, 0);
    tree_.assign(cap + 1, 0);
    for (std::size_t i = 0; i < cap; ++i) {
      if (!flags_[i]) continue;
      for (std::size_t j = i + 1; j <= cap; j += j & (~j + 1)) tree_[j] += 1;
    }
    top_bit_ = 1;
    while (top_bit_ * 2 <= cap) top_bit_ *= 2;
  }

  void insert(std::size_t i) {
    reserve(i + 1);
    if (flags_[i]) return;
    flags_[i] = 1;
    ++size_;
    add(i, 1);
  }

  void erase(std::size_t i) {
    if (!contains(i)) return;
    flags_[i] = 0;
    --size_;
    add(i, -1);
  }

  // Members with index < i.
  std::int64_t count_below(std::size_t i) const {
    if (i > flags_.size()) i = flags_.size();
    std::int64_t acc = 0;
    for (std::size_t j = i; j > 0; j -= j & (~j + 1)) acc += tree_[j];
    return acc;
  }

  // Index of the member with rank k (0-based). Requires k < size().
  std::size_t kth(std::int64_t k) const {
    std::size_t pos = 0;
    for (std::size_t step = top_bit_; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= k) {
        pos = next;
        k -= tree_[next];
      }
    }
    return pos;
  }

 private:
  void add(std::size_t i, std::int32_t delta) {
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }

  std::vector<char> flags_;
  std::vector<std::int32_t> tree_;
  std::size_t top_bit_ = 0;
  std::int64_t size_ = 0;
};

}  // namespace acm
