#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trim/detail/math.hpp"
#include "trim/engine_config.hpp"
#include "trim/errors.hpp"
#include "trim/workload.hpp"

namespace trim {

// ---- cycles, throughput, utilization ---------------------------------------

inline std::uint64_t computational_steps(const LayerShape& l, const EngineParams& p) {
  return detail::ceil_div(std::uint64_t(l.n()), std::uint64_t(p.p_n)) *
         detail::ceil_div(std::uint64_t(l.m()), std::uint64_t(p.p_m));
}

// NC = L_I + ceil(N/P_N) * ceil(M/P_M) * (P_N*K + H_O*W_O).
inline std::uint64_t clock_cycles(const LayerShape& l, const EngineParams& p) {
  using detail::checked_add;
  using detail::checked_mul;
  const std::uint64_t per_step = std::uint64_t(p.p_n) * std::uint64_t(p.k) + std::uint64_t(l.h_o()) * std::uint64_t(l.w_o());
  return checked_add(std::uint64_t(p.l_i), checked_mul(computational_steps(l, p), per_step, "cycle count"), "cycle count");
}

inline double layer_throughput(const LayerShape& l, const EngineParams& p) {
  return static_cast<double>(ops_count(l)) * p.f_clk_hz / static_cast<double>(clock_cycles(l, p)) / 1e9;
}

// Total operations over total execution time, GOPs/s.
inline double network_throughput(const CnnModel& model, const EngineParams& p) {
  std::uint64_t cycles = 0;
  for (const auto& l : model.layers()) cycles = detail::checked_add(cycles, clock_cycles(l, p), "cycle count");
  return static_cast<double>(ops_count(model)) * p.f_clk_hz / static_cast<double>(cycles) / 1e9;
}

inline std::uint64_t pe_count(const EngineParams& p) {
  return std::uint64_t(p.p_n) * std::uint64_t(p.p_m) * std::uint64_t(p.k) * std::uint64_t(p.k);
}

// 2 * PEs * f_clk, GOPs/s.
inline double peak_throughput(const EngineParams& p) { return 2.0 * static_cast<double>(pe_count(p)) * p.f_clk_hz / 1e9; }

// Slice occupancy: the fraction of slices holding a real ifmap channel.
inline double pe_utilization(const LayerShape& l, const EngineParams& p) {
  return static_cast<double>(std::min(l.m(), p.p_m)) / p.p_m;
}

// Cycle-weighted alternative: useful MACs over PE-cycles.
inline double mac_utilization(const LayerShape& l, const EngineParams& p) {
  return static_cast<double>(ops_count(l)) / 2.0 /
         (static_cast<double>(pe_count(p)) * static_cast<double>(clock_cycles(l, p)));
}

struct LayerCycleReport {
  int index = 0;
  std::uint64_t ops = 0;
  std::uint64_t steps = 0;
  std::uint64_t nc = 0;
  double exec_time_s = 0;
  double gops = 0;
  double utilization = 0;
  double mac_utilization = 0;
};

struct CycleModelReport {
  std::vector<LayerCycleReport> layers;
  std::uint64_t total_ops = 0;
  std::uint64_t total_nc = 0;
  double total_time_s = 0;
  double gops = 0;
  double mean_utilization = 0;  // unweighted mean over layers
  double mean_mac_utilization = 0;
};

inline CycleModelReport cycle_model(const CnnModel& model, const EngineParams& p) {
  CycleModelReport r;
  for (const auto& l : model.layers()) {
    LayerCycleReport lr;
    lr.index = l.index();
    lr.ops = ops_count(l);
    lr.steps = computational_steps(l, p);
    lr.nc = clock_cycles(l, p);
    lr.exec_time_s = static_cast<double>(lr.nc) / p.f_clk_hz;
    lr.gops = static_cast<double>(lr.ops) / lr.exec_time_s / 1e9;
    lr.utilization = pe_utilization(l, p);
    lr.mac_utilization = mac_utilization(l, p);
    r.total_ops += lr.ops;
    r.total_nc += lr.nc;
    r.mean_utilization += lr.utilization;
    r.mean_mac_utilization += lr.mac_utilization;
    r.layers.push_back(lr);
  }
  r.total_time_s = static_cast<double>(r.total_nc) / p.f_clk_hz;
  r.gops = static_cast<double>(r.total_ops) / r.total_time_s / 1e9;
  r.mean_utilization /= static_cast<double>(r.layers.size());
  r.mean_mac_utilization /= static_cast<double>(r.layers.size());
  return r;
}

// ---- memory accesses -------------------------------------------------------

// Psum buffer accounting. `single` counts a read-modify-write as one
// transaction, `double_count` as a read plus a write.
enum class PsumConvention { single, double_count };

inline const char* to_string(PsumConvention c) { return c == PsumConvention::single ? "single" : "double"; }

inline PsumConvention parse_psum_convention(const std::string& s) {
  if (s == "single") return PsumConvention::single;
  if (s == "double") return PsumConvention::double_count;
  throw ConfigError("psum_convention", "expected single or double, got '" + s + "'");
}

constexpr double kDefaultInputOverhead = 0.058;

// Access counts of one layer or a whole network. Counts are fractional
// because the ifmap term carries the overhead factor.
struct AccessReport {
  double ifmap = 0;
  double weight = 0;
  double psum_single = 0;
  double psum_double = 0;
  double ofmap = 0;
  PsumConvention convention = PsumConvention::single;

  double psum() const { return convention == PsumConvention::single ? psum_single : psum_double; }
  double total() const { return ifmap + weight + psum() + ofmap; }

  AccessReport& operator+=(const AccessReport& o) {
    ifmap += o.ifmap;
    weight += o.weight;
    psum_single += o.psum_single;
    psum_double += o.psum_double;
    ofmap += o.ofmap;
    return *this;
  }
};

// Reconstructed access model: ifmaps are refetched for every filter group,
// each weight is loaded once, psum traffic follows the channel-group
// accumulation, and each ofmap value is written once.
inline AccessReport access_model(const LayerShape& l, const EngineParams& p, double overhead = kDefaultInputOverhead,
                                 PsumConvention conv = PsumConvention::single) {
  if (overhead < 0) throw ConfigError("overhead", "must be >= 0");
  const double fgroups = static_cast<double>(detail::ceil_div(std::uint64_t(l.n()), std::uint64_t(p.p_n)));
  const double cgroups = static_cast<double>(detail::ceil_div(std::uint64_t(l.m()), std::uint64_t(p.p_m)));
  const double plane_out = static_cast<double>(l.h_o()) * l.w_o();
  AccessReport r;
  r.convention = conv;
  r.ifmap = fgroups * l.m() * static_cast<double>(l.h_i()) * l.w_i() * (1.0 + overhead);
  r.weight = static_cast<double>(l.n()) * l.m() * l.k() * l.k();
  r.psum_single = (cgroups - 1) * plane_out * l.n();
  r.psum_double = 2 * r.psum_single;
  r.ofmap = plane_out * l.n();
  return r;
}

struct NetworkAccessReport {
  std::vector<AccessReport> layers;
  AccessReport total;
};

inline NetworkAccessReport network_access(const CnnModel& model, const EngineParams& p,
                                          double overhead = kDefaultInputOverhead,
                                          PsumConvention conv = PsumConvention::single) {
  NetworkAccessReport r;
  r.total.convention = conv;
  for (const auto& l : model.layers()) {
    r.layers.push_back(access_model(l, p, overhead, conv));
    r.total += r.layers.back();
  }
  return r;
}

// ---- design-space exploration ----------------------------------------------

struct DesignPoint {
  int p_n = 0;
  int p_m = 0;
  std::uint64_t pe_count = 0;
  double peak_gops = 0;
  double network_gops = 0;
  std::uint64_t psum_buffer_bits = 0;
  std::uint64_t bw_bits_per_cycle = 0;
  bool bw_extrapolated = false;
  bool memory_ok = true;
  bool bandwidth_ok = true;

  bool feasible() const { return memory_ok && bandwidth_ok; }
};

using Grid = std::vector<std::pair<int, int>>;  // (P_N, P_M)

inline Grid default_grid() {
  Grid g;
  for (int pn : {1, 4, 8, 16, 24})
    for (int pm : {1, 4, 8, 16, 24}) g.emplace_back(pn, pm);
  return g;
}

// Parses "pn:pm,pn:pm,..." or "values" (a comma list used for both axes).
inline Grid parse_grid(const std::string& text) {
  auto parse_int = [](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v < 1) throw ConfigError("grid", "bad grid value '" + s + "'");
    return v;
  };
  std::vector<std::string> items;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) items.push_back(item);
  if (items.empty()) throw ConfigError("grid", "empty grid");
  Grid g;
  const bool pairs = text.find(':') != std::string::npos;
  if (pairs) {
    for (const auto& item : items) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError("grid", "expected pn:pm, got '" + item + "'");
      g.emplace_back(parse_int(item.substr(0, colon)), parse_int(item.substr(colon + 1)));
    }
  } else {
    std::vector<int> axis;
    for (const auto& item : items) axis.push_back(parse_int(item));
    for (int pn : axis)
      for (int pm : axis) g.emplace_back(pn, pm);
  }
  return g;
}

// Evaluates every grid point of `base` with P_N and P_M replaced. Budgets
// are optional; an absent budget marks every point feasible on that axis.
inline std::vector<DesignPoint> dse_sweep(const CnnModel& model, const EngineParams& base, const Grid& grid,
                                          std::optional<std::uint64_t> memory_budget_bits = std::nullopt,
                                          std::optional<std::uint64_t> bw_budget_bits = std::nullopt) {
  std::vector<DesignPoint> out;
  out.reserve(grid.size());
  for (const auto& [pn, pm] : grid) {
    if (pn < 1 || pm < 1) throw ConfigError("grid", "parallelism factors must be >= 1");
    EngineParams p = base;
    p.p_n = pn;
    p.p_m = pm;
    DesignPoint d;
    d.p_n = pn;
    d.p_m = pm;
    d.pe_count = pe_count(p);
    d.peak_gops = peak_throughput(p);
    d.network_gops = network_throughput(model, p);
    d.psum_buffer_bits = psum_buffer_bits(p);
    d.bw_bits_per_cycle = io_bandwidth_bits(p);
    d.bw_extrapolated = io_bandwidth_extrapolated(p);
    if (memory_budget_bits) d.memory_ok = d.psum_buffer_bits <= *memory_budget_bits;
    if (bw_budget_bits) d.bandwidth_ok = d.bw_bits_per_cycle <= *bw_budget_bits;
    out.push_back(d);
  }
  return out;
}

// ---- reference data and comparison -----------------------------------------

// One row of a per-layer reference table (GOPs/s, memory accesses in
// millions, PE utilization). Layer 0 denotes the network total.
struct ReferenceRow {
  int layer = 0;
  double gops = 0;
  double accesses_m = 0;
  double utilization = 0;
};

struct ReferenceTable {
  std::string name;
  std::vector<ReferenceRow> layers;
  std::optional<ReferenceRow> total;
};

// Reads `layer,gops,accesses_m,utilization` CSV. Lines starting with '#'
// are comments; the first non-comment line is the header. A layer field of
// "total" holds the published total row.
inline ReferenceTable parse_reference_csv(std::istream& in, std::string name) {
  ReferenceTable t;
  t.name = std::move(name);
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("layer,", 0) != 0) throw FormatError("reference header must start with 'layer,'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw FormatError("line " + std::to_string(lineno) + ": expected 4 fields");
    ReferenceRow r;
    try {
      r.layer = f[0] == "total" ? 0 : std::stoi(f[0]);
      r.gops = std::stod(f[1]);
      r.accesses_m = std::stod(f[2]);
      r.utilization = std::stod(f[3]);
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(lineno) + ": non-numeric field");
    }
    if (r.layer == 0) {
      t.total = r;
    } else {
      if (r.layer != static_cast<int>(t.layers.size()) + 1) {
        throw FormatError("line " + std::to_string(lineno) + ": layers must be consecutive from 1");
      }
      t.layers.push_back(r);
    }
  }
  if (!header) throw FormatError("reference file has no header");
  if (t.layers.empty()) throw FormatError("reference file has no layer rows");
  return t;
}

inline ReferenceTable load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("reference", "cannot open " + path);
  const auto slash = path.find_last_of('/');
  return parse_reference_csv(in, slash == std::string::npos ? path : path.substr(slash + 1));
}

// Per-layer memory accesses (millions) of the analytic model as a table.
inline ReferenceTable model_table(const CnnModel& model, const EngineParams& p, double overhead, PsumConvention conv) {
  ReferenceTable t;
  t.name = "model";
  const auto acc = network_access(model, p, overhead, conv);
  const auto cyc = cycle_model(model, p);
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    t.layers.push_back({static_cast<int>(i) + 1, cyc.layers[i].gops, acc.layers[i].total() / 1e6,
                        cyc.layers[i].utilization});
  }
  t.total = ReferenceRow{0, cyc.gops, acc.total.total() / 1e6, cyc.mean_utilization};
  return t;
}

struct RatioRow {
  std::string label;
  double a = 0;
  double b = 0;
  double ratio = 0;  // b / a
};

inline double safe_ratio(double a, double b) {
  if (a == 0) return b == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return b / a;
}

// Category and total ratios b / a.
inline std::vector<RatioRow> compare_reports(const AccessReport& a, const AccessReport& b) {
  std::vector<RatioRow> rows;
  auto add = [&](const char* label, double x, double y) { rows.push_back({label, x, y, safe_ratio(x, y)}); };
  add("ifmap", a.ifmap, b.ifmap);
  add("weight", a.weight, b.weight);
  add("psum", a.psum(), b.psum());
  add("ofmap", a.ofmap, b.ofmap);
  add("total", a.total(), b.total());
  return rows;
}

// Per-layer and total memory-access ratios b / a. The total row sums the
// layers of each side (a published total, when present, is used instead).
inline std::vector<RatioRow> compare_tables(const ReferenceTable& a, const ReferenceTable& b) {
  if (a.layers.size() != b.layers.size()) {
    throw ShapeMismatchError("tables cover " + std::to_string(a.layers.size()) + " and " +
                             std::to_string(b.layers.size()) + " layers");
  }
  std::vector<RatioRow> rows;
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const double x = a.layers[i].accesses_m, y = b.layers[i].accesses_m;
    rows.push_back({"CL" + std::to_string(i + 1), x, y, safe_ratio(x, y)});
    sa += x;
    sb += y;
  }
  if (a.total) sa = a.total->accesses_m;
  if (b.total) sb = b.total->accesses_m;
  rows.push_back({"total", sa, sb, safe_ratio(sa, sb)});
  return rows;
}

}  // namespace trim
