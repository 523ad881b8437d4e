#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rhem {

// Exact binomial coefficient; throws std::overflow_error if the value does
// not fit in 64 bits.
inline std::uint64_t binom_exact(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
      throw std::overflow_error("binomial coefficient overflow");
    }
    result = result * factor / i;  // product of i consecutive integers is divisible by i!
  }
  return result;
}

// Binomial coefficient capped at `cap`; never overflows. Used for feasibility
// checks against huge pools.
inline std::uint64_t binom_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  double approx = 1.0;
  std::uint64_t exact = 1;
  bool exact_valid = true;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    approx = approx * static_cast<double>(factor) / static_cast<double>(i);
    if (exact_valid) {
      if (exact > std::numeric_limits<std::uint64_t>::max() / factor) {
        exact_valid = false;
      } else {
        exact = exact * factor / i;
      }
    }
    if (approx > 2.0 * static_cast<double>(cap)) return cap;
  }
  if (!exact_valid) return cap;
  return exact < cap ? exact : cap;
}

inline double binom_double(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0.0;
  if (k > n - k) k = n - k;
  double result = 1.0;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return result;
}

// Visits every k-subset of {0,...,n-1} in lexicographic order.
// fn receives a span of the chosen indices.
template <class Fn>
void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    fn(std::span<const std::size_t>(idx));
    // advance
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (idx[i] != i + n - k) {
        ++idx[i];
        for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
        break;
      }
      if (i == 0) return;
    }
    if (k == 0) return;
  }
}

// Intersection size of two ascending integer sequences.
inline std::size_t sorted_intersection_count(std::span<const std::uint32_t> a,
                                             std::span<const std::uint32_t> b) {
  std::size_t i = 0, j = 0, count = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

inline void sorted_intersect(std::span<const std::uint32_t> a,
                             std::span<const std::uint32_t> b,
                             std::vector<std::uint32_t>& out) {
  out.clear();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
}

}  // namespace rhem
