#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trim/detail/math.hpp"
#include "trim/errors.hpp"
#include "trim/workload.hpp"

namespace trim {

// One sub-buffer of a reconfigurable shift-register buffer. A tapped
// sub-buffer exposes its leftmost K cells to the diagonal-dispatch mux.
struct SubBuffer {
  int len = 0;
  bool tapped = false;

  friend bool operator==(const SubBuffer&, const SubBuffer&) = default;
};

using SubBufferLayout = std::vector<SubBuffer>;

// An accelerator instance.
struct EngineParams {
  int k = 3;
  int p_m = 1;  // slices per core (parallel ifmaps)
  int p_n = 1;  // cores (parallel filters)
  int b = 8;    // activation / weight width
  int w_im = 3;
  int h_om = 1;
  int w_om = 1;
  double f_clk_hz = 150e6;
  int l_i = 0;
  int psum_entry_bits = 32;
  SubBufferLayout sb_layout;  // empty means "use the default layout"

  friend bool operator==(const EngineParams&, const EngineParams&) = default;
};

// Datapath widths for a given instance and channel count.
struct BitWidths {
  int input_bits = 0;
  int weight_bits = 0;
  int column_psum_bits = 0;
  int slice_out_bits = 0;
  int core_out_bits = 0;
  int accumulator_bits = 0;

  friend bool operator==(const BitWidths&, const BitWidths&) = default;
};

// Sub-buffers of length K, the last one absorbing the remainder, all tapped.
// Realisable path lengths are the multiples of K below W_IM, plus W_IM.
inline SubBufferLayout default_sb_layout(int k, int w_im) {
  SubBufferLayout out;
  if (k < 1 || w_im < k) return out;
  const int full = w_im / k;
  for (int i = 0; i < full; ++i) out.push_back({k, true});
  out.back().len += w_im % k;
  return out;
}

// Path lengths (cells from the RSRB entry to the end of a tapped
// sub-buffer) the layout can realise, ascending.
inline std::vector<int> achievable_widths(const SubBufferLayout& layout) {
  std::vector<int> out;
  int acc = 0;
  for (const auto& sb : layout) {
    acc += sb.len;
    if (sb.tapped) out.push_back(acc);
  }
  return out;
}

// A customised layout tapping exactly the given padded widths; any cells
// beyond the largest width up to `w_im` form one untapped tail.
inline SubBufferLayout layout_for_widths(std::vector<int> widths, int k, int w_im) {
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  if (widths.empty()) throw ConfigError("sb_layout", "no widths requested");
  if (widths.back() > w_im) throw ConfigError("w_im", "width " + std::to_string(widths.back()) + " exceeds W_IM");
  SubBufferLayout out;
  int prev = 0;
  for (int w : widths) {
    if (w - prev < k) {
      throw ConfigError("sb_layout", "padded widths " + std::to_string(prev) + " and " + std::to_string(w) +
                                         " are closer than K; both cannot be tapped");
    }
    out.push_back({w - prev, true});
    prev = w;
  }
  if (prev < w_im) out.push_back({w_im - prev, false});
  return out;
}

inline BitWidths derive_bitwidths(const EngineParams& p, int m) {
  using detail::ceil_log2;
  if (m < 1) throw ConfigError("m", "must be >= 1");
  BitWidths w;
  w.input_bits = p.b;
  w.weight_bits = p.b;
  w.column_psum_bits = 2 * p.b + p.k;
  w.slice_out_bits = w.column_psum_bits + ceil_log2(p.k);
  w.core_out_bits = w.slice_out_bits + ceil_log2(p.p_m);
  w.accumulator_bits = w.slice_out_bits + ceil_log2(m);
  if (w.accumulator_bits > p.psum_entry_bits) {
    const int spare = p.psum_entry_bits - w.slice_out_bits;
    const std::uint64_t max_m = spare < 0 ? 0 : (spare >= 63 ? UINT64_MAX : (std::uint64_t{1} << spare));
    throw ConfigError("psum_entry_bits", "M=" + std::to_string(m) + " needs " + std::to_string(w.accumulator_bits) +
                                             "-bit accumulators but entries hold " +
                                             std::to_string(p.psum_entry_bits) +
                                             " bits; maximum supportable M is " + std::to_string(max_m));
  }
  return w;
}

// P_N * H_OM * W_OM * entry bits.
inline std::uint64_t psum_buffer_bits(const EngineParams& p) {
  using detail::checked_mul;
  return checked_mul(checked_mul(std::uint64_t(p.p_n) * std::uint64_t(p.h_om), std::uint64_t(p.w_om), "psum buffer"),
                     std::uint64_t(p.psum_entry_bits), "psum buffer");
}

// Peak ifmap inputs per slice per cycle. Five for K=3; K+2 elsewhere is an
// extrapolation (see io_bandwidth_extrapolated).
constexpr int peak_inputs_per_slice(int k) { return k + 2; }

inline bool io_bandwidth_extrapolated(const EngineParams& p) { return p.k != 3; }

// (P_M * (K+2) + P_N) * B bits per cycle.
inline std::uint64_t io_bandwidth_bits(const EngineParams& p) {
  return (std::uint64_t(p.p_m) * peak_inputs_per_slice(p.k) + std::uint64_t(p.p_n)) * std::uint64_t(p.b);
}

constexpr double kMib = 1024.0 * 1024.0;

// Checks every invariant of an instance and, when a budget is given, that
// the psum buffers fit in it. Returns the instance with the default
// sub-buffer layout filled in; validating the result again is a no-op.
inline EngineParams validate(const EngineParams& raw, std::optional<std::uint64_t> memory_budget_bits = std::nullopt) {
  EngineParams p = raw;
  if (p.k < 1) throw ConfigError("k", "must be >= 1");
  if (p.p_m < 1) throw ConfigError("p_m", "must be >= 1");
  if (p.p_n < 1) throw ConfigError("p_n", "must be >= 1");
  if (p.b < 2 || p.b > 16) throw ConfigError("b", "must be in [2, 16]");
  if (p.w_im < p.k) throw ConfigError("w_im", "buffer shorter than one K-wide window (W_IM < K)");
  if (p.h_om < 1) throw ConfigError("h_om", "must be >= 1");
  if (p.w_om < 1) throw ConfigError("w_om", "must be >= 1");
  if (!(p.f_clk_hz > 0)) throw ConfigError("f_clk_hz", "must be > 0");
  if (p.l_i < 0) throw ConfigError("l_i", "must be >= 0");
  if (p.psum_entry_bits < 2 || p.psum_entry_bits > 64) throw ConfigError("psum_entry_bits", "must be in [2, 64]");

  if (p.sb_layout.empty()) p.sb_layout = default_sb_layout(p.k, p.w_im);
  int total = 0;
  bool any_tap = false;
  for (std::size_t i = 0; i < p.sb_layout.size(); ++i) {
    const auto& sb = p.sb_layout[i];
    if (sb.len < 1) throw ConfigError("sb_layout", "sub-buffer " + std::to_string(i) + " has length < 1");
    if (sb.tapped && sb.len < p.k) {
      throw ConfigError("sb_layout", "tapped sub-buffer " + std::to_string(i) + " is shorter than K");
    }
    total += sb.len;
    any_tap = any_tap || sb.tapped;
  }
  if (total != p.w_im) {
    throw ConfigError("sb_layout", "sub-buffer lengths sum to " + std::to_string(total) + ", expected W_IM=" +
                                       std::to_string(p.w_im));
  }
  if (!any_tap) throw ConfigError("sb_layout", "no tapped sub-buffer");

  // Entries must at least hold one full channel group.
  derive_bitwidths(p, p.p_m);

  if (memory_budget_bits) {
    const auto need = psum_buffer_bits(p);
    if (need > *memory_budget_bits) {
      std::ostringstream os;
      os.precision(4);
      os << "psum buffers need " << need << " bits (" << need / kMib << " Mib), budget is " << *memory_budget_bits
         << " bits (" << *memory_budget_bits / kMib << " Mib)";
      throw ConfigError("p_n", os.str());
    }
  }
  return p;
}

// Register stages between a compute cycle and the psum-buffer write:
// slice adder tree plus output register, core adder tree plus output
// register, and the accumulate stage.
inline int pipeline_latency(const EngineParams& p) {
  return (detail::ceil_log2(p.k) + 1) + (detail::ceil_log2(p.p_m) + 1) + 1;
}

// The shipped FPGA instance: 7 cores of 24 slices, 3x3 PEs, 8-bit data, at
// 150 MHz, with RSRB taps at VGG-16's padded widths.
inline EngineParams vgg16_engine() {
  EngineParams p;
  p.k = 3;
  p.p_m = 24;
  p.p_n = 7;
  p.b = 8;
  p.w_im = 226;
  p.h_om = 224;
  p.w_om = 224;
  p.f_clk_hz = 150e6;
  p.psum_entry_bits = 32;
  p.sb_layout = layout_for_widths({16, 30, 58, 114, 226}, p.k, p.w_im);
  p.l_i = pipeline_latency(p);
  return validate(p);
}

// A desk-scale instance for simulating `model`: keeps K, P_M, P_N, B, the
// clock and entry width, and resizes the RSRBs and psum buffers to the
// model's extents with taps at each distinct padded width.
inline EngineParams desk_engine_for(const CnnModel& model, const EngineParams& base) {
  EngineParams p = base;
  std::vector<int> widths;
  int h_om = 1, w_om = 1;
  for (const auto& l : model.layers()) {
    widths.push_back(l.padded_width());
    h_om = std::max(h_om, l.h_o());
    w_om = std::max(w_om, l.w_o());
  }
  p.w_im = *std::max_element(widths.begin(), widths.end());
  p.h_om = h_om;
  p.w_om = w_om;
  p.sb_layout = layout_for_widths(widths, p.k, p.w_im);
  p.l_i = std::max(p.l_i, pipeline_latency(p));
  return validate(p);
}

// ---- JSON engine file ------------------------------------------------------

inline nlohmann::json to_json(const EngineParams& p) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& sb : p.sb_layout) layout.push_back({{"len", sb.len}, {"tapped", sb.tapped}});
  return {{"k", p.k},
          {"p_m", p.p_m},
          {"p_n", p.p_n},
          {"b", p.b},
          {"w_im", p.w_im},
          {"h_om", p.h_om},
          {"w_om", p.w_om},
          {"f_clk_hz", p.f_clk_hz},
          {"l_i", p.l_i},
          {"psum_entry_bits", p.psum_entry_bits},
          {"sb_layout", layout}};
}

inline EngineParams engine_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("engine", "expected a JSON object");
  EngineParams p;
  auto int_field = [&](const char* key, int& out, bool required) {
    if (!j.contains(key)) {
      if (required) throw ConfigError(key, "missing");
      return;
    }
    if (!j.at(key).is_number_integer()) throw ConfigError(key, "must be an integer");
    out = j.at(key).get<int>();
  };
  int_field("k", p.k, true);
  int_field("p_m", p.p_m, true);
  int_field("p_n", p.p_n, true);
  int_field("b", p.b, true);
  int_field("w_im", p.w_im, true);
  int_field("h_om", p.h_om, true);
  int_field("w_om", p.w_om, true);
  int_field("l_i", p.l_i, false);
  int_field("psum_entry_bits", p.psum_entry_bits, false);
  if (j.contains("f_clk_hz")) {
    if (!j.at("f_clk_hz").is_number()) throw ConfigError("f_clk_hz", "must be a number");
    p.f_clk_hz = j.at("f_clk_hz").get<double>();
  }
  if (j.contains("sb_layout")) {
    if (!j.at("sb_layout").is_array()) throw ConfigError("sb_layout", "must be an array");
    for (const auto& e : j.at("sb_layout")) {
      if (!e.contains("len") || !e.at("len").is_number_integer()) throw ConfigError("sb_layout", "entry needs len");
      p.sb_layout.push_back({e.at("len").get<int>(), e.value("tapped", false)});
    }
  }
  return validate(p);
}

inline EngineParams load_engine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("engine", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("engine", std::string("invalid JSON: ") + e.what());
  }
  return engine_from_json(j);
}

}  // namespace trim
