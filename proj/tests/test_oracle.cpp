#include <gtest/gtest.h>

#include "brute_force.hpp"
#include "trim/oracle.hpp"

using namespace trim;

namespace {

void expect_equal(const WidePsumMap& got, const brute::Plane& want) {
  ASSERT_EQ(got.height(), static_cast<int>(want.size()));
  ASSERT_EQ(got.width(), static_cast<int>(want[0].size()));
  for (int r = 0; r < got.height(); ++r)
    for (int c = 0; c < got.width(); ++c) ASSERT_EQ(got.at(r, c), want[r][c]) << "at " << r << "," << c;
}

}  // namespace

TEST(Conv2d, ZeroKernelAnnihilates) {
  Stimulus s(1);
  const auto in = s.feature_map(1, 7, 9, 8);
  const std::vector<Weight> ker(9, 0);
  const auto out = conv2d(in.plane(0), ker, 3, 1);
  for (auto v : out.values()) EXPECT_EQ(v, 0);
}

TEST(Conv2d, CountingWindow) {
  const FeatureMap ones(1, 5, 5, 8, std::vector<Activation>(25, 1));
  const std::vector<Weight> ker(9, 1);
  const auto out = conv2d(ones.plane(0), ker, 3, 0);
  ASSERT_EQ(out.height(), 3);
  for (auto v : out.values()) EXPECT_EQ(v, 9);
}

TEST(Conv2d, MatchesBruteForce8x8Padded) {
  Stimulus s(2);
  const auto in = s.feature_map(1, 8, 8, 8);
  const auto w = s.filter_set(1, 1, 3, 8);
  expect_equal(conv2d(in.plane(0), w.kernel(0, 0), 3, 1),
               brute::conv2d(brute::widen(in.values()), 8, 8, brute::widen(w.values()), 3, 1));
}

TEST(Conv2d, PropertyRandomGeometries) {
  Stimulus s(3);
  for (int t = 0; t < 300; ++t) {
    const int k = s.uniform(1, 5), p = s.uniform(0, 2);
    const int h = s.uniform(std::max(1, k - 2 * p), 12), w = s.uniform(std::max(1, k - 2 * p), 12);
    const int bits = s.uniform(2, 12);
    const auto in = s.feature_map(1, h, w, bits);
    const auto f = s.filter_set(1, 1, k, bits);
    expect_equal(conv2d(in.plane(0), f.kernel(0, 0), k, p),
                 brute::conv2d(brute::widen(in.values()), h, w, brute::widen(f.values()), k, p));
  }
}

TEST(Conv2d, OneHotKernelShifts) {
  Stimulus s(4);
  const auto in = s.feature_map(1, 6, 7, 8);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      std::vector<Weight> ker(9, 0);
      ker[static_cast<std::size_t>(i) * 3 + j] = 1;
      const auto out = conv2d(in.plane(0), ker, 3, 1);
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 7; ++c) {
          const int y = r + i - 1, x = c + j - 1;
          const WideInt want = (y >= 0 && y < 6 && x >= 0 && x < 7) ? in.at(0, y, x) : 0;
          EXPECT_EQ(out.at(r, c), want);
        }
      }
    }
  }
}

TEST(Conv2d, Linearity) {
  Stimulus s(5);
  const auto a = s.feature_map(1, 9, 9, 7);
  const auto b = s.feature_map(1, 9, 9, 7);
  std::vector<Activation> sum(a.values().size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = static_cast<Activation>(a.values()[i] + b.values()[i]);
  const FeatureMap ab(1, 9, 9, 8, sum);
  const auto w = s.filter_set(1, 1, 3, 8);
  auto lhs = conv2d(ab.plane(0), w.kernel(0, 0), 3, 1);
  auto rhs = conv2d(a.plane(0), w.kernel(0, 0), 3, 1);
  rhs += conv2d(b.plane(0), w.kernel(0, 0), 3, 1);
  EXPECT_EQ(lhs, rhs);
}

TEST(Conv2d, Errors) {
  const FeatureMap in(1, 2, 2, 8);
  const std::vector<Weight> k9(9, 0);
  EXPECT_THROW(conv2d(in.plane(0), k9, 3, 0), GeometryError);
  EXPECT_THROW(conv2d(in.plane(0), k9, 2, 0), ShapeMismatchError);
  EXPECT_THROW(conv2d(in.plane(0), k9, 3, -1), GeometryError);
}

TEST(Conv3d, SingleChannelCollapses) {
  Stimulus s(6);
  const auto in = s.feature_map(1, 6, 6, 8);
  const auto w = s.filter_set(3, 1, 3, 8);
  const auto out = conv3d_layer(in, w, 1);
  for (int n = 0; n < 3; ++n) EXPECT_EQ(out[n], conv2d(in.plane(0), w.kernel(n, 0), 3, 1));
}

TEST(Conv3d, ChannelGroupsOfTwoAccumulate) {
  Stimulus s(7);
  const auto in = s.feature_map(4, 8, 8, 8);
  const auto w = s.filter_set(2, 4, 3, 8);
  const auto full = conv3d_layer(in, w, 1);
  auto first = conv3d_partial(in, w, 1, 0, 2);
  const auto second = conv3d_partial(in, w, 1, 2, 2);
  for (int n = 0; n < 2; ++n) {
    first[n] += second[n];
    EXPECT_EQ(first[n], full[n]);
  }
}

TEST(Conv3d, RandomPartitionsAreAssociative) {
  Stimulus s(8);
  for (int t = 0; t < 40; ++t) {
    const int m = s.uniform(1, 10);
    const auto in = s.feature_map(m, 5, 6, 8);
    const auto w = s.filter_set(2, m, 3, 8);
    const auto full = conv3d_layer(in, w, 1);
    std::vector<WidePsumMap> acc(2, WidePsumMap(5, 6));
    for (int first = 0; first < m;) {
      const int count = s.uniform(1, m - first);
      const auto part = conv3d_partial(in, w, 1, first, count);
      for (int n = 0; n < 2; ++n) acc[n] += part[n];
      first += count;
    }
    EXPECT_EQ(acc, full);
  }
}

TEST(Conv3d, MatchesBruteForceM8N4) {
  Stimulus s(9);
  const auto in = s.feature_map(8, 7, 6, 8);
  const auto w = s.filter_set(4, 8, 3, 8);
  const auto got = conv3d_layer(in, w, 1);
  const auto want = brute::conv3d(brute::widen(in.values()), 8, 7, 6, brute::widen(w.values()), 4, 3, 1);
  for (int n = 0; n < 4; ++n) expect_equal(got[n], want[n]);
}

TEST(Conv3d, Errors) {
  const FeatureMap in(3, 4, 4, 8);
  const FilterSet w(2, 2, 3, 8);
  EXPECT_THROW(conv3d_layer(in, w, 1), ShapeMismatchError);
  const FilterSet w3(2, 3, 3, 8);
  EXPECT_THROW(conv3d_partial(in, w3, 1, 2, 2), ShapeMismatchError);
}

TEST(Quantize, Cases) {
  EXPECT_EQ(quantize_value(-100, 8, {5, true}), 0);
  EXPECT_EQ(quantize_value(-100, 8, {0, true}), 0);
  EXPECT_EQ(quantize_value(WideInt{1} << 20, 8, {12, true}), 255);
  EXPECT_EQ(quantize_value(300, 8, {0, true}), 255);
  EXPECT_EQ(quantize_value(200, 8, {0, true}), 200);
  EXPECT_EQ(quantize_value(1000, 8, {2, true}), 250);
  // Without ReLU a negative value still saturates at zero after the shift.
  EXPECT_EQ(quantize_value(-100, 8, {2, false}), 0);
}

TEST(Quantize, OfmapAndNegativeShift) {
  WidePsumMap m(1, 3);
  m.at(0, 0) = -5;
  m.at(0, 1) = 17;
  m.at(0, 2) = 4096;
  const auto q = quantize_ofmap(m, 8, {1, true});
  EXPECT_EQ(q.values(), (std::vector<Activation>{0, 8, 255}));
  EXPECT_THROW(quantize_ofmap(m, 8, {-1, true}), ConfigError);
}

TEST(Quantize, DefaultShiftExercisesBothClamps) {
  Stimulus s(10);
  const auto in = s.feature_map(16, 10, 10, 8);
  const auto w = s.filter_set(4, 16, 3, 8);
  const QuantizeConfig q{default_quant_shift(8, 3, 16), true};
  int zeros = 0, sat = 0;
  for (const auto& plane : conv3d_layer(in, w, 1)) {
    for (auto v : quantize_ofmap(plane, 8, q).values()) {
      zeros += v == 0;
      sat += v == 255;
    }
  }
  EXPECT_GT(zeros, 0);
  EXPECT_GT(sat, 0);
}

TEST(Tensors, RangeChecks) {
  EXPECT_THROW(FeatureMap(1, 1, 1, 8, {256}), OverflowError);
  EXPECT_THROW(FilterSet(1, 1, 1, 8, {128}), OverflowError);
  EXPECT_THROW(FilterSet(1, 1, 1, 8, {-129}), OverflowError);
  EXPECT_NO_THROW(FilterSet(1, 1, 1, 8, {-128}));
  EXPECT_THROW(FeatureMap(1, 2, 2, 8, {1, 2, 3}), ShapeMismatchError);
  EXPECT_THROW(FeatureMap(0, 2, 2, 8), ShapeMismatchError);
}

TEST(Stimulus, DeterministicAndInRange) {
  Stimulus a(42), b(42);
  const auto fa = a.feature_map(3, 5, 5, 8);
  EXPECT_EQ(fa, b.feature_map(3, 5, 5, 8));
  const auto w = a.filter_set(2, 3, 3, 4);
  for (auto v : w.values()) {
    EXPECT_GE(v, -8);
    EXPECT_LE(v, 7);
  }
}
