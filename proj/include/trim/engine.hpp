#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "trim/analytics.hpp"
#include "trim/detail/math.hpp"
#include "trim/engine_config.hpp"
#include "trim/errors.hpp"
#include "trim/oracle.hpp"
#include "trim/pipeline.hpp"
#include "trim/slice.hpp"
#include "trim/tensor.hpp"
#include "trim/workload.hpp"

namespace trim {

// ---- step plan -------------------------------------------------------------

struct Step {
  int filter_group = 0;
  int filter_first = 0;
  int filter_count = 0;
  int channel_group = 0;
  int channel_first = 0;
  int channel_count = 0;
  bool first_channel_group = false;
  bool last_channel_group = false;
};

struct StepPlan {
  std::vector<Step> steps;
  int filter_groups = 0;
  int channel_groups = 0;
};

// Filter groups outermost, channel groups innermost, so a core's psum
// buffer accumulates over consecutive steps and ofmaps leave every
// ceil(M/P_M) steps.
inline StepPlan plan_steps(const LayerShape& l, const EngineParams& p) {
  StepPlan plan;
  plan.filter_groups = static_cast<int>(detail::ceil_div(std::uint64_t(l.n()), std::uint64_t(p.p_n)));
  plan.channel_groups = static_cast<int>(detail::ceil_div(std::uint64_t(l.m()), std::uint64_t(p.p_m)));
  plan.steps.reserve(static_cast<std::size_t>(plan.filter_groups) * plan.channel_groups);
  for (int fg = 0; fg < plan.filter_groups; ++fg) {
    for (int cg = 0; cg < plan.channel_groups; ++cg) {
      Step s;
      s.filter_group = fg;
      s.filter_first = fg * p.p_n;
      s.filter_count = std::min(p.p_n, l.n() - s.filter_first);
      s.channel_group = cg;
      s.channel_first = cg * p.p_m;
      s.channel_count = std::min(p.p_m, l.m() - s.channel_first);
      s.first_channel_group = cg == 0;
      s.last_channel_group = cg + 1 == plan.channel_groups;
      plan.steps.push_back(s);
    }
  }
  return plan;
}

// ---- counters and buffers --------------------------------------------------

struct EngineCounters {
  std::uint64_t cycles = 0;
  std::uint64_t steps = 0;
  std::uint64_t ifmap_fetches = 0;   // broadcast fetches, counted once per engine
  std::uint64_t weight_fetches = 0;
  std::uint64_t psum_reads = 0;
  std::uint64_t psum_writes = 0;
  std::uint64_t ofmap_writes = 0;
  std::uint64_t padding_inputs = 0;   // zeros synthesised by the feeders
  std::uint64_t diagonal_inputs = 0;  // RSRB dispatches
  std::uint64_t passes = 0;           // active slice passes of one broadcast stream

  friend bool operator==(const EngineCounters&, const EngineCounters&) = default;
};

// One core's psum buffer: H_OM x W_OM signed entries with per-entry
// transaction counts.
class PsumBuffer {
 public:
  PsumBuffer(int h_om, int w_om, int entry_bits)
      : h_om_(h_om), w_om_(w_om), entry_bits_(entry_bits),
        values_(static_cast<std::size_t>(h_om) * w_om, 0),
        reads_(values_.size(), 0),
        writes_(values_.size(), 0) {}

  int capacity() const noexcept { return h_om_ * w_om_; }
  int entry_bits() const noexcept { return entry_bits_; }

  // Sizes the live region for a layer and clears the transaction counts.
  void begin_layer(int h_o, int w_o) {
    if (h_o > h_om_ || w_o > w_om_) {
      throw GeometryError("ofmap " + std::to_string(h_o) + "x" + std::to_string(w_o) + " exceeds the " +
                          std::to_string(h_om_) + "x" + std::to_string(w_om_) + " psum buffer");
    }
    h_o_ = h_o;
    w_o_ = w_o;
    std::fill(reads_.begin(), reads_.end(), 0);
    std::fill(writes_.begin(), writes_.end(), 0);
  }

  int live_height() const noexcept { return h_o_; }
  int live_width() const noexcept { return w_o_; }

  WideInt read(int r, int c) {
    ++reads_[idx(r, c)];
    return values_[idx(r, c)];
  }

  void write(int r, int c, WideInt v) {
    if (!detail::fits_signed(v, entry_bits_)) {
      throw OverflowError("psum " + std::to_string(v) + " exceeds the " + std::to_string(entry_bits_) + "-bit entry");
    }
    ++writes_[idx(r, c)];
    values_[idx(r, c)] = v;
  }

  WideInt peek(int r, int c) const { return values_[idx(r, c)]; }
  std::uint32_t reads_at(int r, int c) const { return reads_[idx(r, c)]; }
  std::uint32_t writes_at(int r, int c) const { return writes_[idx(r, c)]; }

  WidePsumMap snapshot() const {
    WidePsumMap m(h_o_, w_o_);
    for (int r = 0; r < h_o_; ++r)
      for (int c = 0; c < w_o_; ++c) m.at(r, c) = peek(r, c);
    return m;
  }

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * w_om_ + c; }

  int h_om_, w_om_, entry_bits_;
  int h_o_ = 0, w_o_ = 0;
  std::vector<WideInt> values_;
  std::vector<std::uint32_t> reads_;
  std::vector<std::uint32_t> writes_;
};

// ---- run options and results -----------------------------------------------

// Flips bit `bit` of weight (filter, channel, row, col) as it is loaded.
struct WeightFault {
  int filter = 0;
  int channel = 0;
  int row = 0;
  int col = 0;
  int bit = 0;
};

// B-bit two's-complement bit flip, sign-extended back to a Weight.
inline Weight flip_weight_bit(Weight w, int bit, int bits) {
  const std::uint32_t mask = (std::uint32_t{1} << bits) - 1;
  std::uint32_t raw = (static_cast<std::uint32_t>(static_cast<std::int32_t>(w)) & mask) ^ (std::uint32_t{1} << bit);
  if (raw & (std::uint32_t{1} << (bits - 1))) return static_cast<Weight>(static_cast<std::int32_t>(raw) - (1 << bits));
  return static_cast<Weight>(raw);
}

struct RunOptions {
  std::optional<QuantizeConfig> quant;  // default: default_quant_shift
  bool relu = true;                     // ReLU stage of the default quantizer
  std::optional<WeightFault> fault;
  InputReuse reuse = InputReuse::rsrb;
  std::ostream* trace = nullptr;  // cycle trace of core 0, slice 0
};

struct LayerResult {
  FeatureMap ofmaps;                       // N quantized channels
  std::vector<WidePsumMap> accumulators;   // N wide accumulator planes
  EngineCounters counters;
  WidthPeaks peaks;
  StepPlan plan;
  QuantizeConfig quant;
  std::uint64_t model_cycles = 0;  // closed-form cycle count with L_I = 0
  int latency = 0;               // simulated cycles beyond the prediction
  double worst_pass_overhead = 0;  // max over passes of fetches / (H_I*W_I) - 1
  bool psum_law_holds = false;     // G writes and G-1 reads on every live entry
  bool broadcast_consistent = true;
};

// ---- engine ----------------------------------------------------------------

// P_N cores of P_M slices each, one psum buffer per core, driven in
// lockstep by a single clock. Each step loads weights core by core (P_N*K
// cycles) and then streams H_O*W_O windows; the slice and core pipelines
// drain into the next step's weight phase.
class Engine {
 public:
  explicit Engine(const EngineParams& params, InputReuse reuse = InputReuse::rsrb)
      : p_(validate(params)), reuse_(reuse) {
    const Slice proto(p_.k, p_.b, p_.sb_layout, reuse);
    cores_.resize(static_cast<std::size_t>(p_.p_n));
    for (auto& core : cores_) {
      core.slices.assign(static_cast<std::size_t>(p_.p_m), proto);
      core.pipe = DelayLine<CoreEmission>(static_cast<std::size_t>(detail::ceil_log2(p_.p_m) + 2));
      core.sums.resize(static_cast<std::size_t>(p_.p_m));
    }
    for (int i = 0; i < p_.p_n; ++i) buffers_.emplace_back(p_.h_om, p_.w_om, p_.psum_entry_bits);
  }

  const EngineParams& params() const noexcept { return p_; }
  const PsumBuffer& psum_buffer(int core) const { return buffers_.at(static_cast<std::size_t>(core)); }

  LayerResult run_layer(const FeatureMap& ifmaps, const FilterSet& filters, const LayerShape& layer,
                        const RunOptions& opt = {}) {
    check_layer(ifmaps, filters, layer);
    const BitWidths widths = derive_bitwidths(p_, layer.m());

    LayerResult res;
    res.plan = plan_steps(layer, p_);
    res.quant = opt.quant.value_or(QuantizeConfig{default_quant_shift(p_.b, p_.k, layer.m()), opt.relu});
    if (res.quant.shift < 0) throw ConfigError("shift", "must be >= 0");
    res.ofmaps = FeatureMap(layer.n(), layer.h_o(), layer.w_o(), p_.b);
    res.accumulators.assign(static_cast<std::size_t>(layer.n()), WidePsumMap(layer.h_o(), layer.w_o()));
    res.model_cycles = clock_cycles(layer, p_) - static_cast<std::uint64_t>(p_.l_i);

    ctx_ = Context{&ifmaps, &filters, &layer, &res, &widths, opt.fault ? &*opt.fault : nullptr};
    for (auto& core : cores_) {
      for (auto& s : core.slices) {
        s.set_trace(nullptr);
        s.configure_width(layer.w_i(), layer.padding());
      }
    }
    if (opt.trace) cores_[0].slices[0].set_trace(opt.trace);
    for (auto& b : buffers_) b.begin_layer(layer.h_o(), layer.w_o());

    const std::uint64_t start = cycles_;
    const int plane_out = layer.h_o() * layer.w_o();
    std::vector<PlaneView> planes(static_cast<std::size_t>(p_.p_m));
    for (std::size_t si = 0; si < res.plan.steps.size(); ++si) {
      const Step& st = res.plan.steps[si];
      // Weight phase: core c loads its kernels during cycles [cK, cK + K).
      for (int c = 0; c < p_.p_n; ++c) {
        for (int row = 0; row < p_.k; ++row) {
          for (int cc = 0; cc < p_.p_n; ++cc) {
            auto& core = cores_[static_cast<std::size_t>(cc)];
            for (int j = 0; j < p_.p_m; ++j) {
              auto& s = core.slices[static_cast<std::size_t>(j)];
              if (cc == c) {
                const auto w = kernel_row(st, cc, j, p_.k - 1 - row);
                s.tick_weight_load(w);
              } else {
                s.tick_idle();
              }
            }
          }
          finish_cycle();
        }
      }
      for (int cc = 0; cc < p_.p_n; ++cc) {
        if (cc < st.filter_count) res.counters.weight_fetches += std::uint64_t(st.channel_count) * p_.k * p_.k;
      }

      // Compute phase.
      for (int j = 0; j < p_.p_m; ++j) {
        if (j < st.channel_count) planes[static_cast<std::size_t>(j)] = ifmaps.plane(st.channel_first + j);
      }
      std::vector<SliceCounters> before;
      before.reserve(static_cast<std::size_t>(p_.p_n) * p_.p_m);
      for (auto& core : cores_) {
        for (int j = 0; j < p_.p_m; ++j) {
          auto& s = core.slices[static_cast<std::size_t>(j)];
          before.push_back(s.counters());
          const PlaneView* pv = j < st.channel_count ? &planes[static_cast<std::size_t>(j)] : nullptr;
          s.begin_pass(pv, layer.h_i(), layer.w_i(), layer.padding(), static_cast<std::uint32_t>(si));
        }
      }
      for (int t = 0; t < plane_out; ++t) {
        for (auto& core : cores_)
          for (auto& s : core.slices) s.tick_compute();
        finish_cycle();
      }
      account_passes(st, before, layer, res);
      ++res.counters.steps;
    }
    // Drain the last step.
    while (!drained()) {
      for (auto& core : cores_)
        for (auto& s : core.slices) s.tick_idle();
      finish_cycle();
    }

    res.counters.cycles = cycles_ - start;
    res.latency = static_cast<int>(res.counters.cycles - res.model_cycles);
    for (const auto& core : cores_)
      for (const auto& s : core.slices) res.peaks.merge(s.peaks());
    res.peaks.core_out = std::max(res.peaks.core_out, core_peak_);
    res.peaks.accumulator = std::max(res.peaks.accumulator, acc_peak_);
    core_peak_ = acc_peak_ = 0;
    for (auto& core : cores_)
      for (auto& s : core.slices) s.set_trace(nullptr);

    // Psum transaction law over the entries every core left live.
    const auto g = static_cast<std::uint32_t>(res.plan.channel_groups);
    const std::uint32_t fg = static_cast<std::uint32_t>(res.plan.filter_groups);
    res.psum_law_holds = true;
    for (int c = 0; c < p_.p_n; ++c) {
      // Core c serves one filter in each group that reaches it.
      std::uint32_t groups_served = 0;
      for (std::uint32_t f = 0; f < fg; ++f) groups_served += (int(f) * p_.p_n + c < layer.n()) ? 1 : 0;
      const auto& b = buffers_[static_cast<std::size_t>(c)];
      for (int r = 0; r < layer.h_o(); ++r) {
        for (int col = 0; col < layer.w_o(); ++col) {
          if (b.writes_at(r, col) != g * groups_served || b.reads_at(r, col) != (g - 1) * groups_served) {
            res.psum_law_holds = false;
          }
        }
      }
    }
    ctx_ = {};
    return res;
  }

 private:
  struct CoreEmission {
    int row = 0;
    int col = 0;
    WideInt value = 0;
    std::uint32_t step = 0;
  };

  struct Core {
    std::vector<Slice> slices;
    DelayLine<CoreEmission> pipe;
    std::vector<WideInt> sums;
  };

  struct Context {
    const FeatureMap* ifmaps = nullptr;
    const FilterSet* filters = nullptr;
    const LayerShape* layer = nullptr;
    LayerResult* res = nullptr;
    const BitWidths* widths = nullptr;
    const WeightFault* fault = nullptr;
  };

  void check_layer(const FeatureMap& ifmaps, const FilterSet& filters, const LayerShape& l) const {
    if (l.stride() != 1) {
      throw UnsupportedError("stride " + std::to_string(l.stride()) + " is not supported by the cycle-accurate engine");
    }
    if (l.k() != p_.k) {
      throw ConfigError("k", "layer kernel " + std::to_string(l.k()) + " differs from the engine's K=" + std::to_string(p_.k));
    }
    if (ifmaps.channels() != l.m() || ifmaps.height() != l.h_i() || ifmaps.width() != l.w_i()) {
      throw ShapeMismatchError("ifmaps do not match layer " + std::to_string(l.index()));
    }
    if (filters.filters() != l.n() || filters.channels() != l.m() || filters.k() != l.k()) {
      throw ShapeMismatchError("filters do not match layer " + std::to_string(l.index()));
    }
    if (ifmaps.bits() > p_.b || filters.bits() > p_.b) throw ShapeMismatchError("tensor bit width exceeds B");
    if (l.padded_width() > p_.w_im) {
      throw GeometryError("padded width " + std::to_string(l.padded_width()) + " exceeds W_IM=" + std::to_string(p_.w_im));
    }
    if (l.h_o() > p_.h_om || l.w_o() > p_.w_om) {
      throw GeometryError("ofmap exceeds H_OM x W_OM");
    }
  }

  // Row `row` of the kernel core `cc`, slice `j` holds in step `st`; zeros
  // for inactive positions.
  std::span<const Weight> kernel_row(const Step& st, int cc, int j, int row) {
    row_scratch_.assign(static_cast<std::size_t>(p_.k), 0);
    if (cc < st.filter_count && j < st.channel_count) {
      const int n = st.filter_first + cc;
      const int m = st.channel_first + j;
      const auto ker = ctx_.filters->kernel(n, m);
      for (int col = 0; col < p_.k; ++col) {
        Weight w = ker[static_cast<std::size_t>(row) * p_.k + col];
        const auto* f = ctx_.fault;
        if (f && f->filter == n && f->channel == m && f->row == row && f->col == col) {
          w = flip_weight_bit(w, f->bit, p_.b);
        }
        row_scratch_[static_cast<std::size_t>(col)] = w;
      }
    }
    return row_scratch_;
  }

  // Core adder trees and accumulate stages for the cycle just ticked.
  void finish_cycle() {
    for (std::size_t cc = 0; cc < cores_.size(); ++cc) {
      auto& core = cores_[cc];
      std::optional<CoreEmission> in;
      const auto& lead = core.slices[0].output();
      if (lead) {
        for (std::size_t j = 0; j < core.slices.size(); ++j) core.sums[j] = core.slices[j].output()->value;
        const WideInt v = adder_tree_reduce_inplace(core.sums);
        const WideInt mag = v < 0 ? -v : v;
        core_peak_ = std::max(core_peak_, mag);
        if (!detail::fits_signed(v, ctx_.widths->core_out_bits)) {
          throw OverflowError("core output " + std::to_string(v) + " exceeds " +
                              std::to_string(ctx_.widths->core_out_bits) + " bits");
        }
        in = CoreEmission{lead->row, lead->col, v, lead->tag};
      }
      if (auto out = core.pipe.tick(in)) accumulate(static_cast<int>(cc), *out);
    }
    ++cycles_;
  }

  void accumulate(int cc, const CoreEmission& e) {
    auto& res = *ctx_.res;
    const Step& st = res.plan.steps[e.step];
    if (cc >= st.filter_count) return;  // idle core: no buffer traffic
    auto& buf = buffers_[static_cast<std::size_t>(cc)];
    WideInt acc = e.value;
    if (!st.first_channel_group) {
      acc += buf.read(e.row, e.col);
      ++res.counters.psum_reads;
    }
    const WideInt mag = acc < 0 ? -acc : acc;
    acc_peak_ = std::max(acc_peak_, mag);
    if (!detail::fits_signed(acc, ctx_.widths->accumulator_bits)) {
      throw OverflowError("accumulator " + std::to_string(acc) + " exceeds " +
                          std::to_string(ctx_.widths->accumulator_bits) + " bits");
    }
    buf.write(e.row, e.col, acc);
    ++res.counters.psum_writes;
    if (st.last_channel_group) {
      const int n = st.filter_first + cc;
      res.accumulators[static_cast<std::size_t>(n)].at(e.row, e.col) = acc;
      res.ofmaps.set(n, e.row, e.col, quantize_value(acc, p_.b, res.quant));
      ++res.counters.ofmap_writes;
    }
  }

  void account_passes(const Step& st, const std::vector<SliceCounters>& before, const LayerShape& l, LayerResult& res) {
    const double in_image = static_cast<double>(l.h_i()) * l.w_i();
    std::size_t k = 0;
    for (int cc = 0; cc < p_.p_n; ++cc) {
      for (int j = 0; j < p_.p_m; ++j, ++k) {
        const auto d = cores_[static_cast<std::size_t>(cc)].slices[static_cast<std::size_t>(j)].counters() - before[k];
        if (j >= st.channel_count || cc >= st.filter_count) continue;
        if (cc == 0) {
          res.counters.ifmap_fetches += d.external_input_fetches;
          res.counters.padding_inputs += d.padding_inputs;
          res.counters.diagonal_inputs += d.diagonal_inputs;
          ++res.counters.passes;
          res.worst_pass_overhead =
              std::max(res.worst_pass_overhead, static_cast<double>(d.external_input_fetches) / in_image - 1.0);
        } else {
          const auto d0 = cores_[0].slices[static_cast<std::size_t>(j)].counters() - before[static_cast<std::size_t>(j)];
          if (d.external_input_fetches != d0.external_input_fetches || d.diagonal_inputs != d0.diagonal_inputs ||
              d.padding_inputs != d0.padding_inputs) {
            res.broadcast_consistent = false;
          }
        }
      }
    }
  }

  bool drained() const {
    for (const auto& core : cores_) {
      if (!core.pipe.empty()) return false;
      for (const auto& s : core.slices)
        if (!s.idle()) return false;
    }
    return true;
  }

  EngineParams p_;
  InputReuse reuse_;
  std::vector<Core> cores_;
  std::vector<PsumBuffer> buffers_;
  std::vector<Weight> row_scratch_;
  Context ctx_;
  std::uint64_t cycles_ = 0;
  WideInt core_peak_ = 0;
  WideInt acc_peak_ = 0;
};

// ---- verification ----------------------------------------------------------

struct Mismatch {
  int filter = 0;
  int row = 0;
  int col = 0;
  WideInt expected = 0;
  WideInt actual = 0;
};

struct LayerVerdict {
  bool oracle_match = false;
  bool cycles_reconciled = false;
  std::optional<Mismatch> first_mismatch;
  std::uint64_t predicted_cycles = 0;  // closed-form cycle count with L_I = 0
  std::uint64_t simulated_cycles = 0;
  std::int64_t delta = 0;

  bool pass() const { return oracle_match && cycles_reconciled; }
};

// Compares a run against the oracle (accumulators and quantized ofmaps) and
// checks the simulated cycles lie within [NC, NC + L_I] of the closed-form count NC (L_I = 0).
inline LayerVerdict verify_layer(const LayerResult& r, const FeatureMap& ifmaps, const FilterSet& filters,
                                 const LayerShape& layer, const EngineParams& p) {
  LayerVerdict v;
  const auto golden = conv3d_layer(ifmaps, filters, layer.padding());
  v.oracle_match = true;
  for (int n = 0; n < layer.n() && v.oracle_match; ++n) {
    const auto& g = golden[static_cast<std::size_t>(n)];
    const auto& a = r.accumulators[static_cast<std::size_t>(n)];
    for (int row = 0; row < layer.h_o() && v.oracle_match; ++row) {
      for (int col = 0; col < layer.w_o(); ++col) {
        const bool acc_ok = g.at(row, col) == a.at(row, col);
        const bool q_ok = quantize_value(g.at(row, col), p.b, r.quant) == r.ofmaps.at(n, row, col);
        if (!acc_ok || !q_ok) {
          v.oracle_match = false;
          v.first_mismatch = Mismatch{n, row, col, g.at(row, col), a.at(row, col)};
          break;
        }
      }
    }
  }
  v.predicted_cycles = r.model_cycles;
  v.simulated_cycles = r.counters.cycles;
  v.delta = static_cast<std::int64_t>(r.counters.cycles) - static_cast<std::int64_t>(r.model_cycles);
  v.cycles_reconciled = v.delta >= 0 && v.delta <= p.l_i;
  return v;
}

// Per-layer stimulus seed, so layers are independent and any one can be
// rerun alone.
inline std::uint64_t layer_seed(std::uint64_t base, int layer_index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(layer_index);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct LayerStimulus {
  FeatureMap ifmaps;
  FilterSet filters;
};

inline LayerStimulus make_stimulus(const LayerShape& l, int bits, std::uint64_t base_seed) {
  Stimulus s(layer_seed(base_seed, l.index()));
  auto in = s.feature_map(l.m(), l.h_i(), l.w_i(), bits);
  auto w = s.filter_set(l.n(), l.m(), l.k(), bits);
  return {std::move(in), std::move(w)};
}

struct LayerRunReport {
  int index = 0;
  EngineCounters counters;
  WidthPeaks peaks;
  LayerVerdict verdict;
  AccessReport model;  // analytic access model with zero overhead
  bool psum_law_holds = false;
  bool broadcast_consistent = false;
  double worst_pass_overhead = 0;
  int channel_groups = 0;
  int latency = 0;
  int l_i = 0;
};

struct NetworkRunReport {
  std::vector<LayerRunReport> layers;
  bool all_pass = true;
  std::optional<int> first_failure;  // layer index
};

// Runs every layer on independent random stimulus and verifies it; stops
// at the first failing layer. `fault` applies to the layer it names by
// index (0 = every layer). With `per_layer_desk`, each layer runs on
// desk_engine_for(that layer, p), since a desk-scaled model can have padded
// widths closer than K that one RSRB layout cannot tap together.
inline NetworkRunReport run_network(const CnnModel& model, const EngineParams& p, std::uint64_t seed,
                                    RunOptions opt = {}, int fault_layer = 0, bool per_layer_desk = false) {
  NetworkRunReport out;
  std::optional<Engine> shared;
  if (!per_layer_desk) shared.emplace(p, opt.reuse);
  const auto fault = opt.fault;
  for (const auto& l : model.layers()) {
    std::optional<Engine> own;
    if (per_layer_desk) own.emplace(desk_engine_for(CnnModel(model.name(), {LayerShape(1, l.geometry())}), p), opt.reuse);
    Engine& engine = per_layer_desk ? *own : *shared;
    const auto stim = make_stimulus(l, p.b, seed);
    opt.fault = (fault && (fault_layer == 0 || fault_layer == l.index())) ? fault : std::nullopt;
    const auto r = engine.run_layer(stim.ifmaps, stim.filters, l, opt);
    LayerRunReport lr;
    lr.index = l.index();
    lr.counters = r.counters;
    lr.peaks = r.peaks;
    lr.verdict = verify_layer(r, stim.ifmaps, stim.filters, l, engine.params());
    lr.model = access_model(l, engine.params(), 0.0);
    lr.psum_law_holds = r.psum_law_holds;
    lr.broadcast_consistent = r.broadcast_consistent;
    lr.worst_pass_overhead = r.worst_pass_overhead;
    lr.channel_groups = r.plan.channel_groups;
    lr.latency = r.latency;
    lr.l_i = engine.params().l_i;
    out.layers.push_back(lr);
    if (!lr.verdict.pass()) {
      out.all_pass = false;
      out.first_failure = l.index();
      break;
    }
  }
  return out;
}

}  // namespace trim
