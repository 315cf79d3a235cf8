#pragma once

// Reference computations written independently of the library: explicit
// zero-padded copies and plain nested loops over raw vectors, so a bug in
// the library's oracle cannot hide the same bug in the simulator.

#include <cstdint>
#include <vector>

namespace brute {

using Plane = std::vector<std::vector<long long>>;

inline Plane pad(const std::vector<long long>& flat, int h, int w, int p) {
  Plane out(static_cast<std::size_t>(h + 2 * p), std::vector<long long>(static_cast<std::size_t>(w + 2 * p), 0));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out[r + p][c + p] = flat[static_cast<std::size_t>(r) * w + c];
  return out;
}

// Single-channel 2-D correlation over a padded copy.
inline Plane conv2d(const std::vector<long long>& in, int h, int w, const std::vector<long long>& ker, int k, int p) {
  const Plane x = pad(in, h, w, p);
  const int ho = h + 2 * p - k + 1, wo = w + 2 * p - k + 1;
  Plane out(static_cast<std::size_t>(ho), std::vector<long long>(static_cast<std::size_t>(wo), 0));
  for (int r = 0; r < ho; ++r)
    for (int c = 0; c < wo; ++c)
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) out[r][c] += x[r + i][c + j] * ker[static_cast<std::size_t>(i) * k + j];
  return out;
}

// in: [m][h][w] flattened; w: [n][m][k][k] flattened; result [n] planes.
inline std::vector<Plane> conv3d(const std::vector<long long>& in, int m, int h, int w,
                                 const std::vector<long long>& wt, int n, int k, int p) {
  const int ho = h + 2 * p - k + 1, wo = w + 2 * p - k + 1;
  std::vector<Plane> out(static_cast<std::size_t>(n),
                         Plane(static_cast<std::size_t>(ho), std::vector<long long>(static_cast<std::size_t>(wo), 0)));
  std::vector<Plane> padded;
  for (int ch = 0; ch < m; ++ch) {
    std::vector<long long> plane(in.begin() + static_cast<long>(ch) * h * w, in.begin() + static_cast<long>(ch + 1) * h * w);
    padded.push_back(pad(plane, h, w, p));
  }
  for (int f = 0; f < n; ++f)
    for (int ch = 0; ch < m; ++ch)
      for (int r = 0; r < ho; ++r)
        for (int c = 0; c < wo; ++c)
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
              out[f][r][c] += padded[ch][r + i][c + j] *
                              wt[((static_cast<std::size_t>(f) * m + ch) * k + i) * k + j];
  return out;
}

template <typename Seq>
std::vector<long long> widen(const Seq& s) {
  return std::vector<long long>(s.begin(), s.end());
}

}  // namespace brute
