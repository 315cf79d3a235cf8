#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "trim/errors.hpp"
#include "trim/tensor.hpp"

namespace trim {

// Golden integer convolution. Cross-correlation orientation (no kernel
// flip), stride 1, zero padding; accumulation in 64 bits.
inline WidePsumMap conv2d(const PlaneView& in, std::span<const Weight> kernel, int k, int padding) {
  if (k < 1 || kernel.size() != static_cast<std::size_t>(k) * k) throw ShapeMismatchError("kernel is not K x K");
  if (padding < 0) throw GeometryError("padding must be >= 0");
  const int h_o = in.height + 2 * padding - k + 1;
  const int w_o = in.width + 2 * padding - k + 1;
  if (h_o < 1 || w_o < 1) throw GeometryError("kernel larger than padded plane");
  WidePsumMap out(h_o, w_o);
  for (int r = 0; r < h_o; ++r) {
    for (int c = 0; c < w_o; ++c) {
      WideInt acc = 0;
      for (int i = 0; i < k; ++i) {
        const int y = r + i - padding;
        if (y < 0 || y >= in.height) continue;
        for (int j = 0; j < k; ++j) {
          const int x = c + j - padding;
          if (x < 0 || x >= in.width) continue;
          acc += static_cast<WideInt>(in.at(y, x)) * kernel[static_cast<std::size_t>(i) * k + j];
        }
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

// Channel-accumulated convolution over channels [first, first + count).
inline std::vector<WidePsumMap> conv3d_partial(const FeatureMap& ifmaps, const FilterSet& filters, int padding,
                                               int first_channel, int channel_count) {
  if (ifmaps.channels() != filters.channels()) {
    throw ShapeMismatchError("ifmaps carry " + std::to_string(ifmaps.channels()) + " channels, filters expect " +
                             std::to_string(filters.channels()));
  }
  if (first_channel < 0 || channel_count < 0 || first_channel + channel_count > ifmaps.channels()) {
    throw ShapeMismatchError("channel range out of bounds");
  }
  const int k = filters.k();
  const int h_o = ifmaps.height() + 2 * padding - k + 1;
  const int w_o = ifmaps.width() + 2 * padding - k + 1;
  if (h_o < 1 || w_o < 1) throw GeometryError("kernel larger than padded plane");
  std::vector<WidePsumMap> out;
  out.reserve(static_cast<std::size_t>(filters.filters()));
  for (int n = 0; n < filters.filters(); ++n) {
    WidePsumMap acc(h_o, w_o);
    for (int m = first_channel; m < first_channel + channel_count; ++m) {
      acc += conv2d(ifmaps.plane(m), filters.kernel(n, m), k, padding);
    }
    out.push_back(std::move(acc));
  }
  return out;
}

inline std::vector<WidePsumMap> conv3d_layer(const FeatureMap& ifmaps, const FilterSet& filters, int padding) {
  return conv3d_partial(ifmaps, filters, padding, 0, filters.channels());
}

struct QuantizeConfig {
  int shift = 0;
  bool relu = true;

  friend bool operator==(const QuantizeConfig&, const QuantizeConfig&) = default;
};

// One element: optional ReLU, arithmetic right shift, saturation to B bits.
inline Activation quantize_value(WideInt v, int bits, const QuantizeConfig& q) {
  if (q.relu) v = std::max<WideInt>(v, 0);
  v >>= q.shift;
  const WideInt hi = (WideInt{1} << bits) - 1;
  return static_cast<Activation>(std::clamp<WideInt>(v, 0, hi));
}

inline FeatureMap quantize_ofmap(const WidePsumMap& psums, int bits, const QuantizeConfig& q) {
  if (q.shift < 0) throw ConfigError("shift", "must be >= 0");
  std::vector<Activation> vals;
  vals.reserve(psums.values().size());
  for (auto v : psums.values()) vals.push_back(quantize_value(v, bits, q));
  return FeatureMap(1, psums.height(), psums.width(), bits, std::move(vals));
}

// Shift that places a typical random-stimulus accumulator near the top of
// the B-bit range, so both the ReLU floor and saturation occur.
inline int default_quant_shift(int bits, int k, int m) {
  int lg = 0;
  while ((std::uint64_t{1} << lg) < static_cast<std::uint64_t>(k) * k * m) ++lg;
  return (bits - 2) + (lg + 1) / 2;
}

}  // namespace trim
