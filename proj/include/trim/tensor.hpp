#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trim/errors.hpp"

namespace trim {

using Activation = std::uint16_t;  // B-bit unsigned, B <= 16
using Weight = std::int16_t;       // B-bit signed, B <= 16
using WideInt = std::int64_t;      // psums and accumulators

// Read-only view of one channel plane, row-major.
struct PlaneView {
  std::span<const Activation> values;
  int height = 0;
  int width = 0;

  Activation at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

// Unsigned B-bit activations, [channel][row][col].
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, int bits)
      : FeatureMap(channels, height, width, bits,
                   std::vector<Activation>(static_cast<std::size_t>(channels) * height * width, 0)) {}

  FeatureMap(int channels, int height, int width, int bits, std::vector<Activation> values)
      : channels_(channels), height_(height), width_(width), bits_(bits), values_(std::move(values)) {
    if (channels < 1 || height < 1 || width < 1) throw ShapeMismatchError("feature map dimensions must be >= 1");
    if (bits < 1 || bits > 16) throw ConfigError("bits", "activation width must be in [1, 16]");
    if (values_.size() != static_cast<std::size_t>(channels) * height * width) {
      throw ShapeMismatchError("feature map holds " + std::to_string(values_.size()) + " values, expected " +
                               std::to_string(static_cast<std::size_t>(channels) * height * width));
    }
    const std::uint32_t limit = std::uint32_t{1} << bits;
    for (auto v : values_) {
      if (v >= limit) throw OverflowError("activation " + std::to_string(v) + " exceeds " + std::to_string(bits) + " bits");
    }
  }

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int bits() const noexcept { return bits_; }
  const std::vector<Activation>& values() const noexcept { return values_; }

  Activation at(int ch, int r, int c) const { return values_[index(ch, r, c)]; }

  // Unchecked against the bit width; callers keep values < 2^bits.
  void set(int ch, int r, int c, Activation v) { values_[index(ch, r, c)] = v; }

  PlaneView plane(int ch) const {
    const std::size_t n = static_cast<std::size_t>(height_) * width_;
    return {std::span<const Activation>(values_).subspan(static_cast<std::size_t>(ch) * n, n), height_, width_};
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t index(int ch, int r, int c) const {
    return (static_cast<std::size_t>(ch) * height_ + r) * width_ + c;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  int bits_ = 0;
  std::vector<Activation> values_;
};

// Signed B-bit weights, [filter][channel][row][col].
class FilterSet {
 public:
  FilterSet() = default;
  FilterSet(int filters, int channels, int k, int bits)
      : FilterSet(filters, channels, k, bits,
                  std::vector<Weight>(static_cast<std::size_t>(filters) * channels * k * k, 0)) {}

  FilterSet(int filters, int channels, int k, int bits, std::vector<Weight> values)
      : filters_(filters), channels_(channels), k_(k), bits_(bits), values_(std::move(values)) {
    if (filters < 1 || channels < 1 || k < 1) throw ShapeMismatchError("filter set dimensions must be >= 1");
    if (bits < 2 || bits > 16) throw ConfigError("bits", "weight width must be in [2, 16]");
    if (values_.size() != static_cast<std::size_t>(filters) * channels * k * k) {
      throw ShapeMismatchError("filter set holds " + std::to_string(values_.size()) + " values, expected " +
                               std::to_string(static_cast<std::size_t>(filters) * channels * k * k));
    }
    const int lo = -(1 << (bits - 1));
    const int hi = (1 << (bits - 1)) - 1;
    for (auto v : values_) {
      if (v < lo || v > hi) throw OverflowError("weight " + std::to_string(v) + " exceeds " + std::to_string(bits) + " bits");
    }
  }

  int filters() const noexcept { return filters_; }
  int channels() const noexcept { return channels_; }
  int k() const noexcept { return k_; }
  int bits() const noexcept { return bits_; }
  const std::vector<Weight>& values() const noexcept { return values_; }

  Weight at(int n, int m, int i, int j) const { return values_[index(n, m, i, j)]; }
  void set(int n, int m, int i, int j, Weight v) { values_[index(n, m, i, j)] = v; }

  // The K*K kernel (n, m), row-major.
  std::span<const Weight> kernel(int n, int m) const {
    return std::span<const Weight>(values_).subspan(index(n, m, 0, 0), static_cast<std::size_t>(k_) * k_);
  }

  friend bool operator==(const FilterSet&, const FilterSet&) = default;

 private:
  std::size_t index(int n, int m, int i, int j) const {
    return ((static_cast<std::size_t>(n) * channels_ + m) * k_ + i) * k_ + j;
  }

  int filters_ = 0;
  int channels_ = 0;
  int k_ = 0;
  int bits_ = 0;
  std::vector<Weight> values_;
};

// Wide signed plane of psums or accumulators.
class WidePsumMap {
 public:
  WidePsumMap() = default;
  WidePsumMap(int height, int width)
      : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, 0) {
    if (height < 1 || width < 1) throw ShapeMismatchError("psum map dimensions must be >= 1");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  const std::vector<WideInt>& values() const noexcept { return values_; }
  std::vector<WideInt>& values() noexcept { return values_; }

  WideInt at(int r, int c) const { return values_[static_cast<std::size_t>(r) * width_ + c]; }
  WideInt& at(int r, int c) { return values_[static_cast<std::size_t>(r) * width_ + c]; }

  WidePsumMap& operator+=(const WidePsumMap& o) {
    if (o.height_ != height_ || o.width_ != width_) throw ShapeMismatchError("psum map sizes differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }

  friend bool operator==(const WidePsumMap&, const WidePsumMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<WideInt> values_;
};

// Uniform stimulus from the top bits of mt19937_64, so a seed gives the same
// tensors on every standard library.
class Stimulus {
 public:
  explicit Stimulus(std::uint64_t seed) : rng_(seed) {}

  Activation activation(int bits) { return static_cast<Activation>(rng_() >> (64 - bits)); }

  Weight weight(int bits) {
    const auto raw = static_cast<std::int32_t>(rng_() >> (64 - bits));
    return static_cast<Weight>(raw - (1 << (bits - 1)));
  }

  // Uniform integer in [lo, hi].
  int uniform(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(rng_() % span);
  }

  FeatureMap feature_map(int channels, int height, int width, int bits) {
    FeatureMap f(channels, height, width, bits);
    for (int ch = 0; ch < channels; ++ch)
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) f.set(ch, r, c, activation(bits));
    return f;
  }

  FilterSet filter_set(int filters, int channels, int k, int bits) {
    FilterSet w(filters, channels, k, bits);
    for (int n = 0; n < filters; ++n)
      for (int m = 0; m < channels; ++m)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) w.set(n, m, i, j, weight(bits));
    return w;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace trim
