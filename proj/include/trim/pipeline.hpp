#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "trim/errors.hpp"
#include "trim/tensor.hpp"

namespace trim {

// A chain of `depth` registers. Whatever enters on tick t leaves on tick
// t + depth. Empty slots model bubbles.
template <typename T>
class DelayLine {
 public:
  explicit DelayLine(std::size_t depth = 1) : slots_(depth) {
    if (depth == 0) throw ConfigError("depth", "delay line needs at least one register");
  }

  std::optional<T> tick(std::optional<T> in) {
    std::optional<T> out = std::move(slots_[pos_]);
    if (out) --occupied_;
    if (in) ++occupied_;
    slots_[pos_] = std::move(in);
    pos_ = (pos_ + 1) % slots_.size();
    return out;
  }

  std::size_t depth() const noexcept { return slots_.size(); }
  bool empty() const noexcept { return occupied_ == 0; }

 private:
  std::vector<std::optional<T>> slots_;
  std::size_t pos_ = 0;
  std::size_t occupied_ = 0;
};

// Pairwise adder tree over `values`, reduced in place: ceil(log2 n) levels,
// exact. `stage_peak` receives the largest magnitude produced by any level.
inline WideInt adder_tree_reduce_inplace(std::span<WideInt> values, WideInt* stage_peak = nullptr) {
  if (values.empty()) throw ShapeMismatchError("adder tree needs at least one operand");
  std::size_t n = values.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) {
      values[i] = values[2 * i] + values[2 * i + 1];
      if (stage_peak) *stage_peak = std::max(*stage_peak, values[i] < 0 ? -values[i] : values[i]);
    }
    if (n % 2) values[half] = values[n - 1];
    n = half + n % 2;
  }
  return values[0];
}

inline WideInt adder_tree_reduce(std::span<const WideInt> values, WideInt* stage_peak = nullptr) {
  std::vector<WideInt> scratch(values.begin(), values.end());
  return adder_tree_reduce_inplace(scratch, stage_peak);
}

}  // namespace trim
