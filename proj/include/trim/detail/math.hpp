#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "trim/errors.hpp"

namespace trim::detail {

// ceil(log2(n)); defined as 0 for n <= 1.
constexpr int ceil_log2(std::uint64_t n) {
  int bits = 0;
  std::uint64_t v = 1;
  while (v < n) {
    v <<= 1;
    ++bits;
  }
  return bits;
}

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw OverflowError(std::string(what) + " exceeds 64 bits");
  }
  return out;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw OverflowError(std::string(what) + " exceeds 64 bits");
  }
  return out;
}

// True when `v` is representable as a two's-complement integer of `bits` bits.
constexpr bool fits_signed(std::int64_t v, int bits) {
  if (bits >= 64) return true;
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  const std::int64_t lo = -(std::int64_t{1} << (bits - 1));
  return v >= lo && v <= hi;
}

// Nearest power of two; ties round up.
constexpr std::uint64_t nearest_power_of_two(std::uint64_t v) {
  if (v <= 1) return 1;
  std::uint64_t lo = 1;
  while (lo * 2 <= v) lo *= 2;
  const std::uint64_t hi = lo * 2;
  return (v - lo < hi - v) ? lo : hi;
}

// 64-bit FNV-1a, used for stable config digests in report provenance lines.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace trim::detail
