#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trim/detail/math.hpp"
#include "trim/engine_config.hpp"
#include "trim/errors.hpp"
#include "trim/pipeline.hpp"
#include "trim/tensor.hpp"

namespace trim {

// Multiplexer setting of a PE input: the periphery (I_ext), an RSRB
// diagonal dispatch (I_D) or the right-hand neighbour (I_R).
enum class InputSource : std::uint8_t { none, external, diagonal, right };

struct ProcessingElement {
  Weight weight = 0;
  Activation input = 0;
  WideInt psum_out = 0;
  InputSource source = InputSource::none;
};

// Reconfigurable shift-register buffer between PE row i+1 (writer) and row i
// (reader). The active path runs from the entry to the end of the selected
// tapped sub-buffer; its leftmost K cells form the dispatch window.
//
// Cells are addressed by distance from the entry: 0 is the newest value and
// effective_length()-1 the oldest.
class Rsrb {
 public:
  Rsrb(SubBufferLayout layout, int k) : layout_(std::move(layout)), k_(k) {
    int total = 0;
    for (const auto& sb : layout_) total += sb.len;
    cells_.assign(static_cast<std::size_t>(total), 0);
  }

  // Selects the tap whose path length equals `path_length`.
  void configure(int path_length) {
    int acc = 0;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      acc += layout_[i].len;
      if (layout_[i].tapped && acc == path_length) {
        active_tap_ = static_cast<int>(i);
        length_ = path_length;
        head_ = 0;
        return;
      }
    }
    std::string list;
    for (int w : achievable_widths(layout_)) list += (list.empty() ? "" : ", ") + std::to_string(w);
    throw ConfigError("sb_layout", "no RSRB tap gives a path of " + std::to_string(path_length) +
                                       " cells; achievable padded widths: " + list);
  }

  bool configured() const noexcept { return length_ > 0; }
  int effective_length() const noexcept { return length_; }
  int active_tap() const noexcept { return active_tap_; }
  int physical_cells() const noexcept { return static_cast<int>(cells_.size()); }

  void shift_in(Activation v) {
    head_ = head_ + 1 == length_ ? 0 : head_ + 1;
    cells_[static_cast<std::size_t>(head_)] = v;
  }

  Activation cell(int distance) const {
    int idx = head_ - distance;
    if (idx < 0) idx += length_;
    return cells_[static_cast<std::size_t>(idx)];
  }

  // j-th value of the dispatch window, j = 0 being the oldest.
  Activation window(int j) const { return cell(length_ - 1 - j); }

 private:
  SubBufferLayout layout_;
  int k_;
  std::vector<Activation> cells_;
  int length_ = 0;
  int active_tap_ = -1;
  int head_ = 0;
};

// How rows other than the bottom one receive new inputs once the first
// output row is done. `external_only` bypasses the RSRBs and is kept for
// measuring the reuse they provide.
enum class InputReuse { rsrb, external_only };

struct SliceCounters {
  std::uint64_t cycles = 0;
  std::uint64_t external_input_fetches = 0;  // in-image values from the periphery
  std::uint64_t weight_loads = 0;
  std::uint64_t outputs_emitted = 0;
  std::uint64_t diagonal_inputs = 0;     // values delivered by RSRBs
  std::uint64_t padding_inputs = 0;      // zeros synthesised by the feeder
  std::uint64_t initial_fill_fetches = 0;  // part of external_input_fetches taken during output row 0

  SliceCounters operator-(const SliceCounters& o) const {
    return {cycles - o.cycles,
            external_input_fetches - o.external_input_fetches,
            weight_loads - o.weight_loads,
            outputs_emitted - o.outputs_emitted,
            diagonal_inputs - o.diagonal_inputs,
            padding_inputs - o.padding_inputs,
            initial_fill_fetches - o.initial_fill_fetches};
  }

  friend bool operator==(const SliceCounters&, const SliceCounters&) = default;
};

// Largest magnitudes observed at each datapath stage.
struct WidthPeaks {
  WideInt column_psum = 0;
  WideInt slice_out = 0;
  WideInt core_out = 0;
  WideInt accumulator = 0;

  void merge(const WidthPeaks& o) {
    column_psum = std::max(column_psum, o.column_psum);
    slice_out = std::max(slice_out, o.slice_out);
    core_out = std::max(core_out, o.core_out);
    accumulator = std::max(accumulator, o.accumulator);
  }
};

struct SliceEmission {
  int row = 0;
  int col = 0;
  WideInt value = 0;
  std::uint32_t tag = 0;
};

// One K x K PE array with K-1 RSRBs and a final adder tree.
//
// Schedule. Weights enter Row_0 one kernel row per cycle and shift down, so
// a load takes K cycles. A pass then produces one output per cycle, row by
// row. At the first cycle of output row r every PE row i takes K values of
// padded row r+i in parallel (from the periphery for r = 0 and for the
// bottom row, otherwise from the RSRB window); on the other cycles inputs
// move one PE to the left and one new value enters the rightmost PE. The
// value leaving PE 0 of row i+1 shifts into RSRB i; at a row boundary all K
// values of row i+1 drain into it in parallel. With an RSRB path equal to
// the padded width, each value re-emerges in the window exactly when row i
// needs it, so every in-image input is fetched once per pass.
//
// Column psums ripple down within the cycle and are latched at the bottom
// row; the adder tree adds ceil(log2 K) stages and an output register.
class Slice {
 public:
  Slice(int k, int bits, SubBufferLayout layout, InputReuse reuse = InputReuse::rsrb)
      : k_(k), bits_(bits), reuse_(reuse), pes_(static_cast<std::size_t>(k) * k),
        out_pipe_(static_cast<std::size_t>(detail::ceil_log2(k) + 1)), column_scratch_(static_cast<std::size_t>(k)) {
    if (k < 1) throw ConfigError("k", "must be >= 1");
    if (bits < 2 || bits > 16) throw ConfigError("b", "must be in [2, 16]");
    column_psum_bits_ = 2 * bits + k;
    slice_out_bits_ = column_psum_bits_ + detail::ceil_log2(k);
    for (int i = 0; i + 1 < k; ++i) rsrbs_.emplace_back(layout, k);
  }

  static Slice from_params(const EngineParams& p, InputReuse reuse = InputReuse::rsrb) {
    const auto v = validate(p);
    return Slice(v.k, v.b, v.sb_layout, reuse);
  }

  int k() const noexcept { return k_; }
  int fill_latency() const noexcept { return static_cast<int>(out_pipe_.depth()); }
  const ProcessingElement& pe(int row, int col) const { return pes_[idx(row, col)]; }
  const std::vector<Rsrb>& rsrbs() const noexcept { return rsrbs_; }
  const SliceCounters& counters() const noexcept { return counters_; }
  const WidthPeaks& peaks() const noexcept { return peaks_; }
  bool computing() const noexcept { return computing_; }
  bool idle() const noexcept { return !computing_ && out_pipe_.empty(); }
  const std::optional<SliceEmission>& output() const noexcept { return output_; }

  // Writes one CSV line per cycle: cycle, phase, per-row input source, and
  // the coordinate emitted by the output register (blank when none).
  void set_trace(std::ostream* os) {
    trace_ = os;
    if (trace_) {
      *trace_ << "cycle,phase";
      for (int i = 0; i < k_; ++i) *trace_ << ",row" << i;
      *trace_ << ",emit_row,emit_col\n";
    }
  }

  // ---- cycle-level interface ----------------------------------------------

  // One weight-load cycle: `row` enters Row_0 and every row shifts down.
  void tick_weight_load(std::span<const Weight> row) {
    if (computing_) throw StateError("weights cannot be loaded during a computation phase");
    if (row.size() != static_cast<std::size_t>(k_)) throw ShapeMismatchError("weight row is not K wide");
    for (int i = k_ - 1; i > 0; --i)
      for (int j = 0; j < k_; ++j) pes_[idx(i, j)].weight = pes_[idx(i - 1, j)].weight;
    for (int j = 0; j < k_; ++j) pes_[idx(0, j)].weight = row[static_cast<std::size_t>(j)];
    load_progress_ = (load_progress_ + 1) % k_;
    weights_ready_ = weights_ready_ || load_progress_ == 0;
    counters_.weight_loads += static_cast<std::uint64_t>(k_);
    advance_pipeline(std::nullopt, "W");
  }

  void tick_idle() { advance_pipeline(std::nullopt, "-"); }

  // Selects the RSRB tap for ifmaps of width `w_i` with `padding`.
  void configure_width(int w_i, int padding) {
    if (computing_) throw StateError("width cannot change during a computation phase");
    const int padded = w_i + 2 * padding;
    if (padded < k_) throw GeometryError("padded width " + std::to_string(padded) + " is narrower than K");
    for (auto& r : rsrbs_) r.configure(padded);
    configured_width_ = padded;
  }

  int configured_width() const noexcept { return configured_width_; }

  // Starts a pass over one ifmap plane. A null plane feeds zeros without
  // counting fetches (an idle slice in a residual channel group).
  void begin_pass(const PlaneView* plane, int h_i, int w_i, int padding, std::uint32_t tag = 0) {
    if (computing_) throw StateError("a pass is already in progress");
    if (!weights_ready_ || load_progress_ != 0) throw StateError("weights not loaded");
    if (configured_width_ < 0) throw StateError("width not configured");
    if (w_i + 2 * padding != configured_width_) {
      throw ShapeMismatchError("plane padded width " + std::to_string(w_i + 2 * padding) +
                               " does not match the configured width " + std::to_string(configured_width_));
    }
    if (plane && (plane->height != h_i || plane->width != w_i)) throw ShapeMismatchError("plane size mismatch");
    if (h_i + 2 * padding < k_) throw GeometryError("padded height is smaller than K");
    plane_ = plane;
    padding_ = padding;
    h_i_ = h_i;
    w_i_ = w_i;
    h_o_ = h_i + 2 * padding - k_ + 1;
    w_o_ = w_i + 2 * padding - k_ + 1;
    r_ = 0;
    c_ = 0;
    tag_ = tag;
    computing_ = true;
  }

  // One compute cycle at window (r_, c_).
  void tick_compute() {
    if (!computing_) throw StateError("no pass in progress");
    const bool row_start = c_ == 0;
    const bool reuse = reuse_ == InputReuse::rsrb;

    // RSRB i ingests what leaves row i+1, using last cycle's registers.
    if (reuse && !(r_ == 0 && c_ == 0)) {
      for (int i = 0; i + 1 < k_; ++i) {
        auto& buf = rsrbs_[static_cast<std::size_t>(i)];
        if (row_start) {
          for (int j = 0; j < k_; ++j) buf.shift_in(pes_[idx(i + 1, j)].input);
        } else {
          buf.shift_in(pes_[idx(i + 1, 0)].input);
        }
      }
    }

    for (int i = 0; i < k_; ++i) {
      const int prow = r_ + i;
      const bool from_rsrb = reuse && r_ > 0 && i + 1 < k_;
      if (row_start) {
        for (int j = 0; j < k_; ++j) {
          auto& pe = pes_[idx(i, j)];
          if (from_rsrb) {
            pe.input = rsrbs_[static_cast<std::size_t>(i)].window(j);
            pe.source = InputSource::diagonal;
            ++counters_.diagonal_inputs;
          } else {
            pe.input = fetch(prow, j);
            pe.source = InputSource::external;
          }
        }
      } else {
        for (int j = 0; j + 1 < k_; ++j) {
          pes_[idx(i, j)].input = pes_[idx(i, j + 1)].input;
          pes_[idx(i, j)].source = InputSource::right;
        }
        auto& pe = pes_[idx(i, k_ - 1)];
        if (from_rsrb) {
          const auto& buf = rsrbs_[static_cast<std::size_t>(i)];
          pe.input = buf.cell(buf.effective_length() - k_);
          pe.source = InputSource::diagonal;
          ++counters_.diagonal_inputs;
        } else {
          pe.input = fetch(prow, c_ + k_ - 1);
          pe.source = InputSource::external;
        }
      }
    }

    // Vertical accumulation, then the adder tree.
    for (int j = 0; j < k_; ++j) {
      WideInt acc = 0;
      for (int i = 0; i < k_; ++i) {
        auto& pe = pes_[idx(i, j)];
        acc += static_cast<WideInt>(pe.input) * pe.weight;
        pe.psum_out = acc;
      }
      peaks_.column_psum = std::max(peaks_.column_psum, acc < 0 ? -acc : acc);
      if (!detail::fits_signed(acc, column_psum_bits_)) {
        throw OverflowError("column psum " + std::to_string(acc) + " exceeds " + std::to_string(column_psum_bits_) +
                            " bits");
      }
      column_scratch_[static_cast<std::size_t>(j)] = acc;
    }
    const WideInt sum = adder_tree_reduce_inplace(column_scratch_, &peaks_.slice_out);
    peaks_.slice_out = std::max(peaks_.slice_out, sum < 0 ? -sum : sum);
    if (!detail::fits_signed(sum, slice_out_bits_)) {
      throw OverflowError("slice output " + std::to_string(sum) + " exceeds " + std::to_string(slice_out_bits_) +
                          " bits");
    }

    const SliceEmission e{r_, c_, sum, tag_};
    if (++c_ == w_o_) {
      c_ = 0;
      if (++r_ == h_o_) computing_ = false;
    }
    advance_pipeline(e, row_start ? "CK" : "C");
  }

  // ---- pass-level interface -------------------------------------------------

  // Loads a row-major K x K kernel over K cycles.
  void load_weights(std::span<const Weight> kernel) {
    if (kernel.size() != static_cast<std::size_t>(k_) * k_) throw ShapeMismatchError("kernel is not K x K");
    for (int step = 0; step < k_; ++step) {
      tick_weight_load(kernel.subspan(static_cast<std::size_t>(k_ - 1 - step) * k_, static_cast<std::size_t>(k_)));
    }
  }

  struct PassResult {
    WidePsumMap output;
    SliceCounters counters;       // this pass only
    std::uint64_t fill_latency = 0;  // cycles beyond one per output
    std::uint64_t first_emit_cycle = 0;  // relative to the pass start
    std::uint64_t last_emit_cycle = 0;
  };

  // Streams a whole plane through the slice and drains the pipeline.
  PassResult run_pass(const PlaneView& plane, int padding) {
    if (!idle()) throw StateError("slice is busy");
    const SliceCounters before = counters_;
    begin_pass(&plane, plane.height, plane.width, padding);
    PassResult res{WidePsumMap(h_o_, w_o_), {}, 0, 0, 0};
    bool seen = false;
    auto collect = [&](std::uint64_t cycle) {
      if (!output_) return;
      res.output.at(output_->row, output_->col) = output_->value;
      if (!seen) res.first_emit_cycle = cycle;
      res.last_emit_cycle = cycle;
      seen = true;
    };
    std::uint64_t cycle = 0;
    while (computing_) {
      tick_compute();
      collect(cycle++);
    }
    while (!out_pipe_.empty()) {
      tick_idle();
      collect(cycle++);
    }
    res.counters = counters_ - before;
    res.fill_latency = res.counters.cycles - static_cast<std::uint64_t>(h_o_) * w_o_;
    return res;
  }

 private:
  std::size_t idx(int row, int col) const { return static_cast<std::size_t>(row) * k_ + col; }

  Activation fetch(int prow, int pcol) {
    if (!plane_) return 0;
    const int y = prow - padding_;
    const int x = pcol - padding_;
    if (y < 0 || y >= h_i_ || x < 0 || x >= w_i_) {
      ++counters_.padding_inputs;
      return 0;
    }
    ++counters_.external_input_fetches;
    if (r_ == 0) ++counters_.initial_fill_fetches;
    return plane_->at(y, x);
  }

  void advance_pipeline(std::optional<SliceEmission> in, const char* phase) {
    output_ = out_pipe_.tick(in);
    if (output_) ++counters_.outputs_emitted;
    if (trace_) {
      *trace_ << counters_.cycles << ',' << phase;
      for (int i = 0; i < k_; ++i) {
        *trace_ << ',';
        if (in) {
          // The rightmost PE carries the row's newest input.
          switch (pes_[idx(i, k_ - 1)].source) {
            case InputSource::external: *trace_ << (in->col == 0 ? "EK" : "E"); break;
            case InputSource::diagonal: *trace_ << (in->col == 0 ? "DK" : "D"); break;
            default: *trace_ << "R"; break;
          }
        }
      }
      if (output_) {
        *trace_ << ',' << output_->row << ',' << output_->col << '\n';
      } else {
        *trace_ << ",,\n";
      }
    }
    ++counters_.cycles;
  }

  int k_;
  int bits_;
  InputReuse reuse_;
  int column_psum_bits_ = 0;
  int slice_out_bits_ = 0;
  std::vector<ProcessingElement> pes_;
  std::vector<Rsrb> rsrbs_;
  DelayLine<SliceEmission> out_pipe_;
  std::vector<WideInt> column_scratch_;
  std::optional<SliceEmission> output_;
  SliceCounters counters_;
  WidthPeaks peaks_;
  std::ostream* trace_ = nullptr;

  int load_progress_ = 0;
  bool weights_ready_ = false;
  int configured_width_ = -1;

  bool computing_ = false;
  const PlaneView* plane_ = nullptr;
  int padding_ = 0;
  int h_i_ = 0, w_i_ = 0, h_o_ = 0, w_o_ = 0;
  int r_ = 0, c_ = 0;
  std::uint32_t tag_ = 0;
};

}  // namespace trim
