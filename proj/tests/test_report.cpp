#include <gtest/gtest.h>

#include <sstream>

#include "trim/report.hpp"

using namespace trim;

TEST(Report, FixedIsLocaleFree) {
  EXPECT_EQ(fixed(1.0 / 3, 3), "0.333");
  EXPECT_EQ(fixed(-2.5, 0), "-2");
  EXPECT_EQ(fixed(391.3849, 2), "391.38");
}

TEST(Report, ProvenanceTracksConfig) {
  const auto vgg = builtin_vgg16();
  const auto p = vgg16_engine();
  const auto a = provenance_line(canonical_config(vgg, p));
  EXPECT_EQ(a, provenance_line(canonical_config(vgg, p)));
  EXPECT_EQ(a.rfind("# trim 0.1.0 config=", 0), 0u);
  EXPECT_EQ(a.size(), std::string("# trim 0.1.0 config=").size() + 16);
  auto q = p;
  q.p_n = 6;
  EXPECT_NE(a, provenance_line(canonical_config(vgg, q)));
  EXPECT_NE(a, provenance_line(canonical_config(vgg, p, {{"overhead", 0.1}})));
}

TEST(Report, LayerCsvRowsAndTotal) {
  const auto vgg = builtin_vgg16();
  const auto p = vgg16_engine();
  std::ostringstream os;
  write_layer_csv(os, "# x", vgg, cycle_model(vgg, p), network_access(vgg, p));
  std::istringstream in(os.str());
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 16u);
  EXPECT_EQ(lines[0], "# x");
  EXPECT_EQ(lines[1].rfind("layer,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("2,224,224,64,64,3699376128,1505920,", 0), 0u) << lines[3];
  EXPECT_EQ(lines.back().rfind("total,", 0), 0u);
  EXPECT_NE(lines.back().find(",391.38,"), std::string::npos) << lines.back();
}

TEST(Report, SummaryJson) {
  const auto vgg = builtin_vgg16();
  const auto p = vgg16_engine();
  const auto ey = load_reference(std::string(TRIM_DATA_DIR) + "/eyeriss_vgg16.csv");
  const auto j = summary_json("# x", vgg, p, cycle_model(vgg, p), network_access(vgg, p), kDefaultInputOverhead, ey);
  EXPECT_NEAR(j["network_gops"].get<double>(), 391.385, 0.01);
  EXPECT_NEAR(j["peak_gops"].get<double>(), 453.6, 1e-9);
  EXPECT_EQ(j["io_bandwidth_bits"].get<int>(), 1016);
  EXPECT_EQ(j["io_bandwidth_rounded"].get<int>(), 1024);
  EXPECT_NEAR(j["psum_buffer_mib"].get<double>(), 10.72, 0.005);
  EXPECT_NEAR(j["reference"]["total_ratio"].get<double>(), 5.14, 0.01);
  EXPECT_TRUE(j.contains("footprint_all_layers_mib"));
  auto q = p;
  q.b = 12;
  const auto k = summary_json("# x", vgg, q, cycle_model(vgg, q), network_access(vgg, q), 0.0, std::nullopt);
  EXPECT_FALSE(k.contains("footprint_all_layers_mib"));
  EXPECT_FALSE(k.contains("reference"));
}

TEST(Report, DseAndRatioCsv) {
  std::ostringstream os;
  write_dse_csv(os, "# x", dse_sweep(builtin_vgg16(), vgg16_engine(), {{7, 24}}));
  EXPECT_NE(os.str().find("\n7,24,1512,453.60,391.38,11239424,10.7188,1016,1024,0,1,1,1\n"), std::string::npos)
      << os.str();
  std::ostringstream rs;
  write_ratio_csv(rs, "# x", "a", "b", {{"total", 2, 5, 2.5}});
  EXPECT_EQ(rs.str(), "# x\nlabel,a_accesses_m,b_accesses_m,ratio\ntotal,2.0000,5.0000,2.5000\n");
}

TEST(Report, LayerRunJson) {
  LayerRunReport r;
  r.index = 3;
  r.verdict.oracle_match = false;
  r.verdict.first_mismatch = Mismatch{1, 2, 3, 10, 11};
  const auto j = to_json(r);
  EXPECT_EQ(j["verdict"], "FAIL");
  EXPECT_EQ(j["first_mismatch"]["col"], 3);
  r.verdict.oracle_match = true;
  r.verdict.cycles_reconciled = true;
  r.verdict.first_mismatch.reset();
  EXPECT_FALSE(to_json(r).contains("first_mismatch"));
  EXPECT_EQ(to_json(r)["verdict"], "PASS");
}
