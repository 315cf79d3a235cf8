// Command-line front end: analyze, simulate, dse, compare.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error.
// Configuration errors print one JSON object on stdout.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trim/trim.hpp"

#ifndef TRIM_DATA_DIR
#define TRIM_DATA_DIR "data"
#endif

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string model = "vgg16";
  std::string engine;
  std::string out = ".";
  std::optional<std::string> layers;
  double overhead = trim::kDefaultInputOverhead;
  std::string psum_convention = "single";
};

int config_error(const std::string& type, const std::string& field, const std::string& message) {
  nlohmann::json j{{"error", {{"type", type}, {"field", field}, {"message", message}}}};
  std::cout << j.dump() << '\n';
  return 2;
}

std::vector<int> parse_index_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw trim::ConfigError("layers", "bad layer index '" + item + "'");
    }
  }
  if (out.empty()) throw trim::ConfigError("layers", "empty layer list");
  return out;
}

trim::CnnModel load_model_arg(const Common& c) {
  trim::CnnModel m = c.model == "vgg16" ? trim::builtin_vgg16() : trim::load_model(c.model);
  if (c.layers) {
    const auto idx = parse_index_list(*c.layers);
    for (int i : idx) {
      if (i < 1 || i > static_cast<int>(m.size())) {
        throw trim::ConfigError("layers", "layer " + std::to_string(i) + " not in model");
      }
    }
    m = trim::select_layers(m, idx);
  }
  return m;
}

trim::EngineParams load_engine_arg(const Common& c) {
  return c.engine.empty() ? trim::vgg16_engine() : trim::load_engine(c.engine);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const auto path = (fs::path(dir) / name).string();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw trim::ConfigError("out", "cannot write " + path);
  return os;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--model", c.model, "builtin name (vgg16) or model JSON path");
  cmd->add_option("--engine", c.engine, "engine JSON path (default: the 7x24 VGG-16 instance)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--layers", c.layers, "comma-separated layer indices to keep");
}

void add_access_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--overhead", c.overhead, "ifmap refetch overhead fraction")->check(CLI::Range(0.0, 10.0));
  cmd->add_option("--psum-convention", c.psum_convention, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
}

int cmd_analyze(const Common& c, const std::string& reference) {
  const auto model = load_model_arg(c);
  const auto p = load_engine_arg(c);
  const auto conv = trim::parse_psum_convention(c.psum_convention);
  const auto cyc = trim::cycle_model(model, p);
  const auto acc = trim::network_access(model, p, c.overhead, conv);
  std::optional<trim::ReferenceTable> ref;
  if (!reference.empty()) {
    ref = trim::load_reference(reference);
    if (ref->layers.size() != model.size()) ref.reset();
  }
  const auto prov = trim::provenance_line(trim::canonical_config(
      model, p, {{"command", "analyze"}, {"overhead", c.overhead}, {"psum_convention", c.psum_convention}}));
  {
    auto os = open_out(c.out, "layers.csv");
    trim::write_layer_csv(os, prov, model, cyc, acc);
  }
  const auto summary = trim::summary_json(prov, model, p, cyc, acc, c.overhead, ref);
  {
    auto os = open_out(c.out, "summary.json");
    os << summary.dump(2) << '\n';
  }
  std::cout << "layers " << model.size() << "  network " << trim::fixed(cyc.gops, 1) << " GOPs/s  peak "
            << trim::fixed(trim::peak_throughput(p), 1) << " GOPs/s  utilization "
            << trim::fixed(cyc.mean_utilization, 2) << "  accesses " << trim::fixed(acc.total.total() / 1e6, 2)
            << " M\n";
  return 0;
}

struct SimFlags {
  std::uint64_t seed = 1;
  int scale = 1;
  bool trace = false;
  bool inject_fault = false;
  int fault_layer = 0;
  bool no_relu = false;
  bool desk = false;
};

int cmd_simulate(const Common& c, const SimFlags& f) {
  if (f.scale < 1) throw trim::ConfigError("scale", "must be >= 1");
  auto model = load_model_arg(c);
  if (f.scale > 1) model = trim::scale_spatial(model, f.scale);
  const auto p = load_engine_arg(c);
  const bool per_layer = f.desk || f.scale > 1;

  trim::RunOptions opt;
  std::ofstream trace_os;
  if (f.trace) {
    trace_os = open_out(c.out, "trace.csv");
    opt.trace = &trace_os;
  }
  opt.relu = !f.no_relu;
  int fault_layer = 0;
  if (f.inject_fault) {
    fault_layer = f.fault_layer == 0 ? model.layers().front().index() : f.fault_layer;
    opt.fault = trim::WeightFault{0, 0, 0, 0, 0};
  }

  const auto rep = trim::run_network(model, p, f.seed, opt, fault_layer, per_layer);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& l : rep.layers) {
    j.push_back(trim::to_json(l));
    std::cout << "CL" << l.index << ' ' << (l.verdict.pass() ? "PASS" : "FAIL") << "  cycles "
              << l.verdict.simulated_cycles << "  model " << l.verdict.predicted_cycles << "  delta " << l.verdict.delta
              << " (L_I " << l.l_i << ")\n";
    if (l.verdict.first_mismatch) {
      const auto& m = *l.verdict.first_mismatch;
      std::cout << "  first mismatch: filter " << m.filter << " at (" << m.row << ", " << m.col << ") expected "
                << m.expected << " got " << m.actual << '\n';
    }
  }
  const auto prov = trim::provenance_line(trim::canonical_config(
      model, p, {{"command", "simulate"}, {"seed", f.seed}, {"scale", f.scale}, {"fault", f.inject_fault}}));
  {
    auto os = open_out(c.out, "simulate.json");
    os << nlohmann::json{{"provenance", prov}, {"all_pass", rep.all_pass}, {"layers", j}}.dump(2) << '\n';
  }
  const std::size_t passed = static_cast<std::size_t>(
      std::count_if(rep.layers.begin(), rep.layers.end(), [](const auto& l) { return l.verdict.pass(); }));
  std::cout << passed << '/' << model.size() << " PASS\n";
  return rep.all_pass && rep.layers.size() == model.size() ? 0 : 1;
}

struct DseFlags {
  std::string grid;
  std::optional<double> memory_budget_mib;
  std::optional<std::uint64_t> bw_budget;
};

int cmd_dse(const Common& c, const DseFlags& f) {
  const auto model = load_model_arg(c);
  const auto p = load_engine_arg(c);
  const auto grid = f.grid.empty() ? trim::default_grid() : trim::parse_grid(f.grid);
  std::optional<std::uint64_t> mem;
  if (f.memory_budget_mib) mem = static_cast<std::uint64_t>(*f.memory_budget_mib * trim::kMib);
  const auto pts = trim::dse_sweep(model, p, grid, mem, f.bw_budget);
  nlohmann::json opts{{"command", "dse"}, {"grid", f.grid}};
  if (mem) opts["memory_budget_bits"] = *mem;
  if (f.bw_budget) opts["bw_budget"] = *f.bw_budget;
  const auto prov = trim::provenance_line(trim::canonical_config(model, p, opts));
  {
    auto os = open_out(c.out, "dse.csv");
    trim::write_dse_csv(os, prov, pts);
  }
  const auto best = std::max_element(pts.begin(), pts.end(),
                                     [](const auto& a, const auto& b) { return a.network_gops < b.network_gops; });
  std::cout << pts.size() << " design points; best (P_N=" << best->p_n << ", P_M=" << best->p_m << ") "
            << trim::fixed(best->network_gops, 1) << " GOPs/s\n";
  const auto feasible = std::count_if(pts.begin(), pts.end(), [](const auto& d) { return d.feasible(); });
  std::cout << feasible << " feasible under the given budgets\n";
  return 0;
}

int cmd_compare(const Common& c, const std::string& reference, const std::string& baseline) {
  const auto model = load_model_arg(c);
  const auto p = load_engine_arg(c);
  const auto conv = trim::parse_psum_convention(c.psum_convention);
  const auto ref = trim::load_reference(reference);
  const auto ours = baseline.empty() ? trim::model_table(model, p, c.overhead, conv) : trim::load_reference(baseline);
  const auto rows = trim::compare_tables(ours, ref);
  const auto prov = trim::provenance_line(trim::canonical_config(
      model, p,
      {{"command", "compare"}, {"reference", ref.name}, {"baseline", ours.name}, {"overhead", c.overhead},
       {"psum_convention", c.psum_convention}}));
  {
    auto os = open_out(c.out, "compare.csv");
    trim::write_ratio_csv(os, prov, ours.name, "reference", rows);
  }
  std::cout << ref.name << " / " << ours.name << " total accesses: " << trim::fixed(rows.back().ratio, 3) << "x\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-accurate simulator and analytical model of a triangular-input-movement CNN accelerator"};
  app.require_subcommand(1);

  Common common;
  const std::string default_reference = std::string(TRIM_DATA_DIR) + "/eyeriss_vgg16.csv";
  std::string reference;
  std::string baseline;

  auto* analyze = app.add_subcommand("analyze", "closed-form cycles, throughput, utilization and accesses");
  add_common(analyze, common);
  add_access_flags(analyze, common);
  analyze->add_option("--reference", reference, "reference table for the access ratio");

  SimFlags sim;
  auto* simulate = app.add_subcommand("simulate", "cycle-accurate run verified against the oracle");
  add_common(simulate, common);
  simulate->add_option("--seed", sim.seed, "stimulus seed");
  simulate->add_option("--scale", sim.scale, "spatial divisor for desk-scale runs");
  simulate->add_flag("--trace", sim.trace, "write a per-cycle trace of core 0, slice 0");
  simulate->add_flag("--inject-fault", sim.inject_fault, "flip one weight bit (checker sanity test)");
  simulate->add_option("--fault-layer", sim.fault_layer, "layer receiving the fault (default: first)");
  simulate->add_flag("--no-relu", sim.no_relu, "disable the ReLU stage of the quantizer");
  simulate->add_flag("--desk", sim.desk, "size RSRBs and psum buffers per layer");

  DseFlags dse;
  auto* dse_cmd = app.add_subcommand("dse", "sweep (P_N, P_M)");
  add_common(dse_cmd, common);
  dse_cmd->add_option("--grid", dse.grid, "pn:pm,... pairs or a value list used on both axes");
  dse_cmd->add_option("--memory-budget-mib", dse.memory_budget_mib, "psum buffer budget in Mib");
  dse_cmd->add_option("--bw-budget", dse.bw_budget, "I/O bandwidth budget in bits per cycle");

  auto* compare = app.add_subcommand("compare", "memory-access ratios against a reference table");
  add_common(compare, common);
  add_access_flags(compare, common);
  compare->add_option("--reference", reference, "reference table (default: the shipped Eyeriss data)");
  compare->add_option("--baseline", baseline, "use this table instead of the model as the first side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return config_error("usage", "", e.what());
  }

  try {
    if (analyze->parsed()) return cmd_analyze(common, reference);
    if (simulate->parsed()) return cmd_simulate(common, sim);
    if (dse_cmd->parsed()) return cmd_dse(common, dse);
    if (compare->parsed()) return cmd_compare(common, reference.empty() ? default_reference : reference, baseline);
  } catch (const trim::ConfigError& e) {
    return config_error("config", e.field(), e.what());
  } catch (const trim::Error& e) {
    return config_error("config", "", e.what());
  } catch (const nlohmann::json::exception& e) {
    return config_error("format", "", e.what());
  } catch (const fs::filesystem_error& e) {
    return config_error("io", "out", e.what());
  }
  return 2;
}
