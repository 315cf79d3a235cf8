#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "brute_force.hpp"
#include "trim/engine.hpp"

using namespace trim;

namespace {

EngineParams desk(int p_n, int p_m, const LayerShape& l) {
  EngineParams p;
  p.k = l.k();
  p.p_n = p_n;
  p.p_m = p_m;
  p.b = 8;
  return desk_engine_for(CnnModel("t", {LayerShape(1, l.geometry())}), p);
}

LayerShape shape(int h, int w, int m, int n, int k = 3, int padding = 1) {
  return LayerShape(1, LayerGeometry{h, w, m, n, k, 1, padding});
}

void expect_matches_brute(const LayerResult& r, const FeatureMap& in, const FilterSet& w, const LayerShape& l) {
  const auto want = brute::conv3d(brute::widen(in.values()), l.m(), l.h_i(), l.w_i(), brute::widen(w.values()), l.n(),
                                  l.k(), l.padding());
  for (int n = 0; n < l.n(); ++n)
    for (int y = 0; y < l.h_o(); ++y)
      for (int x = 0; x < l.w_o(); ++x) ASSERT_EQ(r.accumulators[n].at(y, x), want[n][y][x]);
}

}  // namespace

TEST(PlanSteps, Vgg2) {
  const auto plan = plan_steps(builtin_vgg16().layer(2), vgg16_engine());
  EXPECT_EQ(plan.steps.size(), 30u);
  EXPECT_EQ(plan.filter_groups, 10);
  EXPECT_EQ(plan.channel_groups, 3);
  EXPECT_EQ(plan.steps.back().filter_count, 1);   // 64 = 9*7 + 1
  EXPECT_EQ(plan.steps.back().channel_count, 16); // 64 = 2*24 + 16
}

TEST(PlanSteps, FullyParallelIsOneStep) {
  EngineParams p;
  p.p_n = 4;
  p.p_m = 8;
  const auto plan = plan_steps(shape(5, 5, 8, 4), p);
  ASSERT_EQ(plan.steps.size(), 1u);
  EXPECT_TRUE(plan.steps[0].first_channel_group);
  EXPECT_TRUE(plan.steps[0].last_channel_group);
}

TEST(PlanSteps, TwoByTwoFiltersResidentChannelsInnermost) {
  EngineParams p;
  p.p_n = 2;
  p.p_m = 2;
  const auto plan = plan_steps(shape(8, 8, 4, 2), p);
  ASSERT_EQ(plan.steps.size(), 2u);
  EXPECT_EQ(plan.steps[0].filter_first, 0);
  EXPECT_EQ(plan.steps[1].filter_first, 0);
  EXPECT_EQ(plan.steps[0].channel_first, 0);
  EXPECT_EQ(plan.steps[1].channel_first, 2);
  EXPECT_FALSE(plan.steps[0].last_channel_group);
  EXPECT_TRUE(plan.steps[1].last_channel_group);
}

TEST(PlanSteps, CoversEveryPairOnce) {
  Stimulus s(1);
  for (int t = 0; t < 100; ++t) {
    EngineParams p;
    p.p_n = s.uniform(1, 6);
    p.p_m = s.uniform(1, 6);
    const auto l = shape(4, 4, s.uniform(1, 20), s.uniform(1, 20));
    const auto plan = plan_steps(l, p);
    EXPECT_EQ(plan.steps.size(), computational_steps(l, p));
    std::set<std::pair<int, int>> seen;
    for (const auto& st : plan.steps)
      for (int n = 0; n < st.filter_count; ++n)
        for (int m = 0; m < st.channel_count; ++m)
          EXPECT_TRUE(seen.insert({st.filter_first + n, st.channel_first + m}).second);
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(l.m()) * l.n());
  }
}

TEST(Engine, TwoByTwoDeskCaseBitExact) {
  const auto l = shape(8, 8, 4, 2);
  const auto p = desk(2, 2, l);
  Stimulus s(2);
  const auto in = s.feature_map(4, 8, 8, 8);
  const auto w = s.filter_set(2, 4, 3, 8);
  Engine e(p);
  const auto r = e.run_layer(in, w, l);
  expect_matches_brute(r, in, w, l);
  for (int n = 0; n < 2; ++n) {
    const auto q = quantize_ofmap(r.accumulators[n], 8, r.quant);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_EQ(r.ofmaps.at(n, y, x), q.at(0, y, x));
  }
  EXPECT_EQ(r.counters.steps, 2u);
  EXPECT_TRUE(r.psum_law_holds);
  EXPECT_TRUE(r.broadcast_consistent);
  // G = 2: every live entry of both buffers written twice and read once.
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(e.psum_buffer(c).writes_at(3, 4), 2u);
    EXPECT_EQ(e.psum_buffer(c).reads_at(3, 4), 1u);
  }
  EXPECT_EQ(r.counters.psum_writes, 2u * 2 * 64);
  EXPECT_EQ(r.counters.psum_reads, 2u * 64);
}

TEST(Engine, CycleLawAndCounters) {
  Stimulus s(3);
  for (int t = 0; t < 30; ++t) {
    const auto l = shape(s.uniform(3, 9), s.uniform(3, 9), s.uniform(1, 12), s.uniform(1, 9), 3, s.uniform(0, 1));
    const auto p = desk(s.uniform(1, 4), s.uniform(1, 5), l);
    const auto in = s.feature_map(l.m(), l.h_i(), l.w_i(), 8);
    const auto w = s.filter_set(l.n(), l.m(), 3, 8);
    Engine e(p);
    const auto r = e.run_layer(in, w, l);
    expect_matches_brute(r, in, w, l);
    const std::uint64_t steps = computational_steps(l, p);
    EXPECT_EQ(r.counters.steps, steps);
    EXPECT_EQ(r.counters.cycles, steps * (std::uint64_t(p.p_n) * 3 + std::uint64_t(l.h_o()) * l.w_o()) +
                                     std::uint64_t(pipeline_latency(p)));
    EXPECT_LE(r.latency, p.l_i);
    const auto m = access_model(l, p, 0.0);
    EXPECT_EQ(static_cast<double>(r.counters.weight_fetches), m.weight);
    EXPECT_EQ(static_cast<double>(r.counters.ofmap_writes), m.ofmap);
    EXPECT_EQ(static_cast<double>(r.counters.ifmap_fetches), m.ifmap);
    EXPECT_LE(r.worst_pass_overhead, 0.06);
    EXPECT_TRUE(r.psum_law_holds);
    const std::uint64_t g = r.plan.channel_groups;
    const std::uint64_t live = std::uint64_t(l.h_o()) * l.w_o() * l.n();
    EXPECT_EQ(r.counters.psum_writes, g * live);
    EXPECT_EQ(r.counters.psum_reads, (g - 1) * live);
    EXPECT_EQ(r.counters.psum_reads, static_cast<std::uint64_t>(m.psum_single));
  }
}

TEST(Engine, ZeroWeightsSameCycles) {
  const auto l = shape(6, 6, 5, 3);
  const auto p = desk(2, 2, l);
  Stimulus s(4);
  const auto in = s.feature_map(5, 6, 6, 8);
  Engine e(p);
  const auto a = e.run_layer(in, FilterSet(3, 5, 3, 8), l);
  const auto b = e.run_layer(in, s.filter_set(3, 5, 3, 8), l);
  for (auto v : a.ofmaps.values()) EXPECT_EQ(v, 0);
  EXPECT_EQ(a.counters, b.counters);
}

TEST(Engine, FaultIsDetectedAndLocated) {
  const auto l = shape(6, 6, 3, 2);
  const auto p = desk(2, 2, l);
  Stimulus s(5);
  const auto in = s.feature_map(3, 6, 6, 8);
  const auto w = s.filter_set(2, 3, 3, 8);
  Engine e(p);
  RunOptions opt;
  opt.fault = WeightFault{1, 2, 1, 1, 3};
  const auto r = e.run_layer(in, w, l, opt);
  const auto v = verify_layer(r, in, w, l, e.params());
  EXPECT_FALSE(v.oracle_match);
  ASSERT_TRUE(v.first_mismatch.has_value());
  EXPECT_EQ(v.first_mismatch->filter, 1);
  EXPECT_TRUE(v.cycles_reconciled);
  const auto clean = e.run_layer(in, w, l);
  EXPECT_TRUE(verify_layer(clean, in, w, l, e.params()).pass());
}

TEST(Engine, FlipWeightBit) {
  EXPECT_EQ(flip_weight_bit(0, 0, 8), 1);
  EXPECT_EQ(flip_weight_bit(0, 7, 8), -128);
  EXPECT_EQ(flip_weight_bit(-1, 7, 8), 127);
  EXPECT_EQ(flip_weight_bit(5, 2, 8), 1);
}

TEST(Engine, Errors) {
  const auto l = shape(6, 6, 3, 2);
  const auto p = desk(2, 2, l);
  Engine e(p);
  Stimulus s(6);
  const auto in = s.feature_map(3, 6, 6, 8);
  const auto w = s.filter_set(2, 3, 3, 8);
  EXPECT_THROW(e.run_layer(in, w, LayerShape(1, LayerGeometry{7, 7, 3, 2, 3, 2, 1})), UnsupportedError);
  EXPECT_THROW(e.run_layer(s.feature_map(2, 6, 6, 8), w, l), ShapeMismatchError);
  EXPECT_THROW(e.run_layer(in, s.filter_set(3, 3, 3, 8), l), ShapeMismatchError);
  EXPECT_THROW(e.run_layer(in, s.filter_set(2, 3, 1, 8), shape(6, 6, 3, 2, 1, 0)), ConfigError);
  const auto big = shape(12, 12, 3, 2);
  EXPECT_THROW(e.run_layer(s.feature_map(3, 12, 12, 8), w, big), GeometryError);
  // A width with no RSRB tap.
  const auto narrow = shape(5, 5, 3, 2);
  EXPECT_THROW(e.run_layer(s.feature_map(3, 5, 5, 8), w, narrow), ConfigError);
  RunOptions neg;
  neg.quant = QuantizeConfig{-1, true};
  EXPECT_THROW(e.run_layer(in, w, l, neg), ConfigError);
}

TEST(PsumBuffer, CountsAndOverflow) {
  PsumBuffer b(3, 4, 8);
  b.begin_layer(2, 3);
  b.write(1, 2, 127);
  EXPECT_EQ(b.read(1, 2), 127);
  EXPECT_EQ(b.writes_at(1, 2), 1u);
  EXPECT_EQ(b.reads_at(1, 2), 1u);
  EXPECT_THROW(b.write(0, 0, 128), OverflowError);
  EXPECT_THROW(b.write(0, 0, -129), OverflowError);
  EXPECT_THROW(b.begin_layer(4, 1), GeometryError);
  b.begin_layer(2, 3);
  EXPECT_EQ(b.writes_at(1, 2), 0u);
  EXPECT_EQ(b.snapshot().at(1, 2), 127);
}

TEST(Engine, ResidualGroupsExcludeIdleCounts) {
  // M = 5 over P_M = 4 and N = 3 over P_N = 2: both residual.
  const auto l = shape(5, 5, 5, 3);
  const auto p = desk(2, 4, l);
  Stimulus s(7);
  const auto in = s.feature_map(5, 5, 5, 8);
  const auto w = s.filter_set(3, 5, 3, 8);
  Engine e(p);
  const auto r = e.run_layer(in, w, l);
  expect_matches_brute(r, in, w, l);
  EXPECT_EQ(r.counters.weight_fetches, 3u * 5 * 9);
  EXPECT_EQ(r.counters.ifmap_fetches, 2u * 5 * 25);
  EXPECT_EQ(r.counters.ofmap_writes, 3u * 25);
  EXPECT_EQ(r.counters.passes, 2u * 5);
  EXPECT_TRUE(r.psum_law_holds);
}

TEST(Engine, EngineReusableAcrossLayers) {
  const auto model = CnnModel::from_geometries("t", {{6, 6, 3, 4, 3, 1, 1}, {4, 4, 4, 2, 3, 1, 0}});
  EngineParams base;
  base.p_n = 2;
  base.p_m = 2;
  const auto p = desk_engine_for(model, base);
  const auto rep = run_network(model, p, 11);
  ASSERT_EQ(rep.layers.size(), 2u);
  EXPECT_TRUE(rep.all_pass);
  for (const auto& l : rep.layers) {
    EXPECT_TRUE(l.psum_law_holds);
    EXPECT_EQ(l.verdict.delta, pipeline_latency(p));
  }
}

TEST(Engine, SingleLayerNetworkMatchesRunLayer) {
  const auto l = shape(6, 6, 3, 2);
  const CnnModel model("t", {l});
  const auto p = desk(2, 2, l);
  const auto rep = run_network(model, p, 5);
  const auto stim = make_stimulus(l, 8, 5);
  Engine e(p);
  const auto r = e.run_layer(stim.ifmaps, stim.filters, l);
  EXPECT_EQ(rep.layers[0].counters, r.counters);
  EXPECT_TRUE(rep.all_pass);
}

TEST(Engine, NetworkStopsAtFirstFailure) {
  const auto model = CnnModel::from_geometries("t", {{6, 6, 3, 2, 3, 1, 1}, {6, 6, 3, 2, 3, 1, 1}, {6, 6, 3, 2, 3, 1, 1}});
  EngineParams base;
  base.p_n = 2;
  base.p_m = 2;
  RunOptions opt;
  opt.fault = WeightFault{0, 0, 1, 1, 6};
  const auto rep = run_network(model, desk_engine_for(model, base), 3, opt, 2);
  EXPECT_FALSE(rep.all_pass);
  ASSERT_TRUE(rep.first_failure.has_value());
  EXPECT_EQ(*rep.first_failure, 2);
  EXPECT_EQ(rep.layers.size(), 2u);
}

TEST(Engine, ScaledVggFirstLayersPass) {
  const auto model = select_layers(scale_spatial(builtin_vgg16(), 16), {1, 5, 13});
  const auto rep = run_network(model, vgg16_engine(), 1, {}, 0, true);
  EXPECT_TRUE(rep.all_pass);
  EXPECT_EQ(rep.layers.size(), 3u);
}

TEST(Engine, TraceCoversCoreZeroSliceZero) {
  const auto l = shape(4, 4, 2, 2);
  const auto p = desk(2, 2, l);
  Stimulus s(8);
  std::ostringstream os;
  RunOptions opt;
  opt.trace = &os;
  Engine e(p);
  const auto r = e.run_layer(s.feature_map(2, 4, 4, 8), s.filter_set(2, 2, 3, 8), l, opt);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, r.counters.cycles + 1);  // header plus one line per cycle
}
