#pragma once

#include <cinttypes>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trim/analytics.hpp"
#include "trim/detail/math.hpp"
#include "trim/engine.hpp"
#include "trim/engine_config.hpp"
#include "trim/workload.hpp"

namespace trim {

inline constexpr const char* kVersion = "0.1.0";

// Fixed-precision rendering, independent of stream state and locale.
inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// "# trim <version> config=<digest>" where the digest covers the canonical
// text of every input that shaped the output.
inline std::string provenance_line(const std::string& canonical_config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, detail::fnv1a(canonical_config));
  return std::string("# trim ") + kVersion + " config=" + buf;
}

inline std::string canonical_config(const CnnModel& model, const EngineParams& p, const nlohmann::json& extra = {}) {
  nlohmann::json j{{"model", to_json(model)}, {"engine", to_json(p)}};
  if (!extra.is_null()) j["options"] = extra;
  return j.dump();
}

// Per-layer table with the columns of the published comparison plus the
// access breakdown. Accesses are in millions.
inline void write_layer_csv(std::ostream& os, const std::string& provenance, const CnnModel& model,
                            const CycleModelReport& cyc, const NetworkAccessReport& acc) {
  os << provenance << '\n';
  os << "layer,h_o,w_o,m,n,ops,nc,exec_time_ms,gops,utilization,mac_utilization,"
        "ifmap_m,weight_m,psum_single_m,psum_double_m,ofmap_m,accesses_m\n";
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const auto& l = model.layers()[i];
    const auto& c = cyc.layers[i];
    const auto& a = acc.layers[i];
    os << l.index() << ',' << l.h_o() << ',' << l.w_o() << ',' << l.m() << ',' << l.n() << ',' << c.ops << ','
       << c.nc << ',' << fixed(c.exec_time_s * 1e3, 4) << ',' << fixed(c.gops, 2) << ',' << fixed(c.utilization, 4)
       << ',' << fixed(c.mac_utilization, 4) << ',' << fixed(a.ifmap / 1e6, 4) << ',' << fixed(a.weight / 1e6, 4)
       << ',' << fixed(a.psum_single / 1e6, 4) << ',' << fixed(a.psum_double / 1e6, 4) << ','
       << fixed(a.ofmap / 1e6, 4) << ',' << fixed(a.total() / 1e6, 4) << '\n';
  }
  const auto& t = acc.total;
  os << "total,,,,," << cyc.total_ops << ',' << cyc.total_nc << ',' << fixed(cyc.total_time_s * 1e3, 4) << ','
     << fixed(cyc.gops, 2) << ',' << fixed(cyc.mean_utilization, 4) << ',' << fixed(cyc.mean_mac_utilization, 4)
     << ',' << fixed(t.ifmap / 1e6, 4) << ',' << fixed(t.weight / 1e6, 4) << ',' << fixed(t.psum_single / 1e6, 4)
     << ',' << fixed(t.psum_double / 1e6, 4) << ',' << fixed(t.ofmap / 1e6, 4) << ',' << fixed(t.total() / 1e6, 4)
     << '\n';
}

inline nlohmann::json summary_json(const std::string& provenance, const CnnModel& model, const EngineParams& p,
                                   const CycleModelReport& cyc, const NetworkAccessReport& acc, double overhead,
                                   const std::optional<ReferenceTable>& reference) {
  const double peak = peak_throughput(p);
  nlohmann::json j{
      {"provenance", provenance},
      {"model", model.name()},
      {"layers", model.size()},
      {"total_ops", cyc.total_ops},
      {"total_cycles", cyc.total_nc},
      {"exec_time_ms", cyc.total_time_s * 1e3},
      {"network_gops", cyc.gops},
      {"peak_gops", peak},
      {"gap_to_peak", 1.0 - cyc.gops / peak},
      {"mean_utilization", cyc.mean_utilization},
      {"mean_mac_utilization", cyc.mean_mac_utilization},
      {"psum_buffer_bits", psum_buffer_bits(p)},
      {"psum_buffer_mib", static_cast<double>(psum_buffer_bits(p)) / kMib},
      {"io_bandwidth_bits", io_bandwidth_bits(p)},
      {"io_bandwidth_rounded", detail::nearest_power_of_two(io_bandwidth_bits(p))},
      {"io_bandwidth_extrapolated", io_bandwidth_extrapolated(p)},
      {"accesses",
       {{"input_overhead", overhead},
        {"psum_convention", to_string(acc.total.convention)},
        {"ifmap_m", acc.total.ifmap / 1e6},
        {"weight_m", acc.total.weight / 1e6},
        {"psum_single_m", acc.total.psum_single / 1e6},
        {"psum_double_m", acc.total.psum_double / 1e6},
        {"ofmap_m", acc.total.ofmap / 1e6},
        {"total_m", acc.total.total() / 1e6}}},
  };
  if (p.b % 8 == 0) {
    const auto fp = network_footprint(model, p.b);
    j["footprint_all_layers_mib"] = static_cast<double>(fp.all_layers_bytes) / kMib;
    j["footprint_peak_layer_mib"] = static_cast<double>(fp.peak_layer_bytes) / kMib;
    j["footprint_peak_layer"] = fp.peak_layer;
  }
  if (reference) {
    const auto rows = compare_tables(model_table(model, p, overhead, acc.total.convention), *reference);
    j["reference"] = {{"name", reference->name}, {"total_ratio", rows.back().ratio}};
  }
  return j;
}

inline void write_dse_csv(std::ostream& os, const std::string& provenance, const std::vector<DesignPoint>& pts) {
  os << provenance << '\n';
  os << "p_n,p_m,pe_count,peak_gops,network_gops,psum_buffer_bits,psum_buffer_mib,bw_bits_per_cycle,"
        "bw_rounded,bw_extrapolated,memory_ok,bandwidth_ok,feasible\n";
  for (const auto& d : pts) {
    os << d.p_n << ',' << d.p_m << ',' << d.pe_count << ',' << fixed(d.peak_gops, 2) << ','
       << fixed(d.network_gops, 2) << ',' << d.psum_buffer_bits << ','
       << fixed(static_cast<double>(d.psum_buffer_bits) / kMib, 4) << ',' << d.bw_bits_per_cycle << ','
       << detail::nearest_power_of_two(d.bw_bits_per_cycle) << ',' << d.bw_extrapolated << ',' << d.memory_ok << ','
       << d.bandwidth_ok << ',' << d.feasible() << '\n';
  }
}

inline void write_ratio_csv(std::ostream& os, const std::string& provenance, const std::string& a_name,
                            const std::string& b_name, const std::vector<RatioRow>& rows) {
  os << provenance << '\n';
  os << "label," << a_name << "_accesses_m," << b_name << "_accesses_m,ratio\n";
  for (const auto& r : rows) {
    os << r.label << ',' << fixed(r.a, 4) << ',' << fixed(r.b, 4) << ',' << fixed(r.ratio, 4) << '\n';
  }
}

inline nlohmann::json to_json(const EngineCounters& c) {
  return {{"cycles", c.cycles},
          {"steps", c.steps},
          {"ifmap_fetches", c.ifmap_fetches},
          {"weight_fetches", c.weight_fetches},
          {"psum_reads", c.psum_reads},
          {"psum_writes", c.psum_writes},
          {"ofmap_writes", c.ofmap_writes},
          {"padding_inputs", c.padding_inputs},
          {"diagonal_inputs", c.diagonal_inputs},
          {"passes", c.passes}};
}

// Layer run report: cycles, counters, verdict, closed-form prediction and delta.
inline nlohmann::json to_json(const LayerRunReport& r) {
  nlohmann::json j{
      {"layer", r.index},
      {"verdict", r.verdict.pass() ? "PASS" : "FAIL"},
      {"oracle_match", r.verdict.oracle_match},
      {"cycles_reconciled", r.verdict.cycles_reconciled},
      {"simulated_cycles", r.verdict.simulated_cycles},
      {"model_cycles", r.verdict.predicted_cycles},
      {"delta", r.verdict.delta},
      {"l_i", r.l_i},
      {"counters", to_json(r.counters)},
      {"model", {{"weight", r.model.weight}, {"ofmap", r.model.ofmap}, {"ifmap", r.model.ifmap}}},
      {"psum_law_holds", r.psum_law_holds},
      {"broadcast_consistent", r.broadcast_consistent},
      {"worst_pass_overhead", r.worst_pass_overhead},
      {"peaks",
       {{"column_psum", r.peaks.column_psum},
        {"slice_out", r.peaks.slice_out},
        {"core_out", r.peaks.core_out},
        {"accumulator", r.peaks.accumulator}}},
  };
  if (r.verdict.first_mismatch) {
    const auto& m = *r.verdict.first_mismatch;
    j["first_mismatch"] = {{"filter", m.filter}, {"row", m.row}, {"col", m.col}, {"expected", m.expected},
                           {"actual", m.actual}};
  }
  return j;
}

}  // namespace trim
