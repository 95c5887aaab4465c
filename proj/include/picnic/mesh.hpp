// Copyright 2026 the picnic-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"
#include "picnic/control.hpp"
#include "picnic/pe.hpp"
#include "picnic/router.hpp"
#include "picnic/scu.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// One compute tile: the router mesh, one PE per router, SCU pairs above the
// odd columns, and the program-memory controller.
//
// The mesh advances under a two-phase clock. Phase 1 decides, from
// start-of-cycle state only, which routers can perform their unit action;
// phase 2 commits. Every ingress FIFO has a single producer, so commit order
// cannot change the outcome and runs are bit-deterministic.
//
// Command semantics per mode (one unit action per row iteration):
//   route   pop one flit from the lowest rd_en port, copy to every out_en
//           port; all-or-nothing on downstream space; intxfer_en taps the
//           flit into scratchpad[sp_addr].
//   psum    pop one flit per rd_en port, add scratchpad[sp_addr] when
//           intxfer_en; sum goes to the out_en ports, or back to
//           scratchpad[sp_addr] when out_en is empty (reduce-tree root).
//   act     y = (slope * x >> act_shift) + offset, clamped at zero when the
//           clamp register is set; parameters live in the config region.
//   dmac    rd_en with two bits: acc[sp_addr] += a*b.
//           rd_en with one bit + intxfer_en: acc[out_en] += flit * sp[addr].
//           rd_en empty + out_en set: flush acc[sp_addr] >> dmac_shift.
//           two rd_en bits + out_en set: emit (a*b) >> dmac_shift directly
//           (elementwise-product form, no accumulator).
//   spwr    pop one flit into scratchpad[sp_addr].
//   sprd    push scratchpad[sp_addr] to the out_en ports.
//   pe      stream pe_array words from scratchpad[sp_addr..] into the PE;
//           outputs drain autonomously into the PE ingress FIFO.
//
// Repeated iterations of a row advance each command's effective sp_addr by a
// per-mode stride (pe_array words for PE issue, one word for any other
// scratchpad access), which is what lets a repeat count stream a region.
// ---------------------------------------------------------------------------

struct TileStats {
  std::uint64_t injected = 0;
  std::uint64_t fanout_extra = 0;  // copies beyond the first per forward
  std::uint64_t egress = 0;
  std::uint64_t stored = 0;  // flits written into scratchpads
  std::uint64_t dmac_overflows = 0;
  std::uint64_t dropped = 0;
};

struct C2CEgressRecord {
  Cycle cycle;
  unsigned router;
  Value payload;
};

using TraceFn = std::function<void(Cycle, unsigned router, unsigned port,
                                   const char* event, Value payload)>;

class TileSim {
 public:
  explicit TileSim(const HardwareConfig& hw)
      : hw_(hw), controller_(hw.router_count(), hw.npm_rows_per_bank,
                             hw.coprocessor_rows_per_cycle) {
    hw_.validate();
    if ((hw_.scratchpad_words & (hw_.scratchpad_words - 1)) != 0)
      throw ConfigError("scratchpad_words must be a power of two");
    const unsigned n = hw_.router_count();
    routers_.reserve(n);
    pes_.reserve(n);
    for (unsigned r = 0; r < hw_.mesh_rows; ++r)
      for (unsigned c = 0; c < hw_.mesh_cols; ++c) {
        routers_.emplace_back(hw_, r * hw_.mesh_cols + c, r, c);
        pes_.push_back(PeEngine{PeArray(hw_), {}, 0});
      }
    pwl_ = std::make_unique<PwlTable>(hw_);
    scus_.resize(n);
    for (unsigned i = 0; i < n; ++i)
      if (routers_[i].has_tsv_up())
        for (unsigned s = 0; s < hw_.scus_per_odd_router; ++s)
          scus_[i].slots.emplace_back(pwl_.get(), hw_.scu_cache_capacity, hw_.numeric_mode);
    staged_.resize(n);
  }

  const HardwareConfig& hw() const { return hw_; }
  NpmController& controller() { return controller_; }
  Cycle now() const { return cycle_; }
  const TileStats& stats() const { return stats_; }
  const std::vector<C2CEgressRecord>& c2c_egress() const { return egress_; }
  void clear_c2c_egress() { egress_.clear(); }
  void set_trace(TraceFn fn) { trace_ = std::move(fn); }

  RouterState& router(unsigned row, unsigned col) {
    return routers_.at(std::size_t(row) * hw_.mesh_cols + col);
  }
  RouterState& router_by_id(unsigned id) { return routers_.at(id); }
  PeArray& pe(unsigned row, unsigned col) {
    return pes_.at(std::size_t(row) * hw_.mesh_cols + col).array;
  }
  unsigned scu_domain_clamps() const {
    unsigned n = 0;
    for (const auto& a : scus_)
      for (const auto& u : a.slots) n += u.domain_clamps();
    return n;
  }

  void queue_image(const NpmImage& img) { controller_.queue_image(img); }

  // External arrivals enter through the TSV-down ingress of even-column
  // routers; the staging queue models the optical die's receive buffer.
  void inject(unsigned router_id, Value payload, Cycle not_before = 0) {
    staged_.at(router_id).push_back(Injection{not_before, Flit{payload, 0xFFFFFFFFu, inj_seq_++}});
    ++stats_.injected;
  }

  std::uint64_t staged_pending() const {
    std::uint64_t n = 0;
    for (const auto& q : staged_) n += q.size();
    return n;
  }

  bool done() const {
    if (!controller_.done()) return false;
    for (const auto& p : pes_)
      if (p.out_pos < p.outputs.size()) return false;
    for (const auto& a : scus_)
      for (const auto& u : a.slots)
        if (u.pending_outputs() > 0) return false;
    for (const auto& s : staged_)
      if (!s.empty()) return false;
    return true;
  }

  void run(Cycle max_cycles = 10'000'000) {
    const Cycle limit = cycle_ + max_cycles;
    while (!done()) {
      step();
      if (cycle_ >= limit)
        throw Error("tile watchdog: program did not finish within " +
                    std::to_string(max_cycles) + " cycles");
    }
  }

  // One clock cycle.
  void step() {
    if (!iteration_loaded_ && controller_.row_active()) load_iteration();

    snapshot();
    // Phase 1: decide.
    fires_.assign(routers_.size(), false);
    for (std::size_t i = 0; i < routers_.size(); ++i)
      if (iteration_loaded_ && !routers_[i].cmd_done) fires_[i] = can_fire(routers_[i]);
    // Phase 2: commit.
    for (std::size_t i = 0; i < routers_.size(); ++i)
      if (fires_[i]) execute(routers_[i]);

    tick_engines();
    ++cycle_;

    bool completed = false;
    if (iteration_loaded_) {
      completed = true;
      for (const auto& r : routers_)
        if (!r.cmd_done) {
          completed = false;
          break;
        }
      if (completed) iteration_loaded_ = false;
    }
    controller_.tick(completed);
  }

  struct PeEngine {
    PeArray array;
    std::vector<Value> outputs;
    std::size_t out_pos = 0;
  };

 private:
  struct Injection {
    Cycle not_before;
    Flit flit;
  };

  struct ScuAdapter {
    std::vector<ScuUnit> slots;
    unsigned active = 0;
    bool awaiting_header = true;
    bool accepted_this_cycle = false;

    bool pending() const {
      for (const auto& u : slots)
        if (u.pending_outputs() > 0) return true;
      return false;
    }
  };

  void load_iteration() {
    const auto& dispatch = controller_.dispatch();
    const std::uint32_t iter =
        controller_.active_row().repeat - controller_.repeat_remaining();
    for (std::size_t i = 0; i < routers_.size(); ++i) {
      RouterState& r = routers_[i];
      r.cmd = dispatch[i];
      r.pe_countdown = 0;
      const Mode m = r.cmd.mode();
      const bool needs_source =
          m == Mode::kRoute || m == Mode::kActivation || m == Mode::kSpWrite;
      if (r.cmd.is_idle() || m == Mode::kReserved || (needs_source && r.cmd.rd_en == 0)) {
        r.cmd_done = true;  // nothing to do; does not hold up the barrier
        continue;
      }
      r.cmd_done = false;
      // Apply the per-iteration scratchpad stride.
      const unsigned stride = sp_stride(r.cmd);
      r.cmd.sp_addr = static_cast<std::uint16_t>(
          (r.cmd.sp_addr + std::uint64_t(stride) * iter) & (hw_.scratchpad_words - 1));
    }
    iteration_loaded_ = true;
  }

  unsigned sp_stride(const Instruction& c) const {
    switch (c.mode()) {
      case Mode::kPeIssue: return hw_.pe_array;
      case Mode::kSpWrite:
      case Mode::kSpRead: return 1;
      case Mode::kRoute:
      case Mode::kActivation: return c.intxfer_en ? 1 : 0;
      case Mode::kPartialSum: return (c.intxfer_en || c.out_en == 0) ? 1 : 0;
      // In the scratchpad-operand form sp_addr walks the operand vector; in
      // the other forms it selects a MAC lane and must stay put.
      case Mode::kDmac: return c.intxfer_en ? 1 : 0;
      default: return 0;
    }
  }

  void snapshot() {
    sizes_.resize(routers_.size());
    for (std::size_t i = 0; i < routers_.size(); ++i)
      for (unsigned p = 0; p < kPortCount; ++p)
        sizes_[i][p] = static_cast<std::uint16_t>(routers_[i].fifos[p].size());
    scu_accept_.assign(routers_.size(), false);
    for (std::size_t i = 0; i < routers_.size(); ++i) {
      auto& a = scus_[i];
      a.accepted_this_cycle = false;
      if (a.slots.empty()) continue;
      if (a.awaiting_header) {
        // A header is accepted once the previously active unit has drained.
        scu_accept_[i] = a.slots[a.active].idle();
      } else {
        scu_accept_[i] = a.slots[a.active].collecting();
      }
    }
  }

  int neighbor_of(const RouterState& r, unsigned port) const {
    switch (port) {
      case kPortN: return r.row == 0 ? -1 : static_cast<int>(r.id - hw_.mesh_cols);
      case kPortS:
        return r.row + 1 >= hw_.mesh_rows ? -1 : static_cast<int>(r.id + hw_.mesh_cols);
      case kPortW: return r.col == 0 ? -1 : static_cast<int>(r.id - 1);
      case kPortE: return r.col + 1 >= hw_.mesh_cols ? -1 : static_cast<int>(r.id + 1);
      default: return -1;
    }
  }

  // True when a flit emitted by r through `port` can be accepted this cycle.
  // Pushes into nonexistent space (mesh edge, unconnected TSV) are "accepted"
  // and dropped at commit, flagged in the stats.
  bool push_ok(const RouterState& r, unsigned port) const {
    switch (port) {
      case kPortN:
      case kPortE:
      case kPortS:
      case kPortW: {
        const int n = neighbor_of(r, port);
        if (n < 0) return true;  // edge: drop
        return sizes_[n][opposite_port(port)] < hw_.fifo_depth;
      }
      case kPortPE: return true;  // no egress path into the PE; drop
      case kPortUp:
        if (!r.has_tsv_up()) return true;  // unconnected: drop
        return scu_accept_[r.id];
      case kPortDown: return true;  // C2C egress buffer (or drop if unconnected)
      default: return false;
    }
  }

  bool rd_ready(const RouterState& r, std::uint8_t mask) const {
    for (unsigned p = 0; p < kPortCount; ++p)
      if ((mask & (1u << p)) && sizes_[r.id][p] == 0) return false;
    return mask != 0;
  }

  static unsigned lowest_bit(std::uint8_t mask) {
    for (unsigned p = 0; p < kPortCount; ++p)
      if (mask & (1u << p)) return p;
    return kPortCount;
  }

  bool outs_ok(const RouterState& r, std::uint8_t mask) const {
    for (unsigned p = 0; p < kPortCount; ++p)
      if ((mask & (1u << p)) && !push_ok(r, p)) return false;
    return true;
  }

  bool can_fire(const RouterState& r) const {
    const Instruction& c = r.cmd;
    switch (c.mode()) {
      case Mode::kRoute:
        return rd_ready(r, static_cast<std::uint8_t>(1u << lowest_bit(c.rd_en))) &&
               outs_ok(r, c.out_en);
      case Mode::kPartialSum:
        return rd_ready(r, c.rd_en) && outs_ok(r, c.out_en);
      case Mode::kActivation:
        return rd_ready(r, static_cast<std::uint8_t>(1u << lowest_bit(c.rd_en))) &&
               outs_ok(r, c.out_en);
      case Mode::kDmac:
        if (c.rd_en == 0) return c.out_en != 0 && outs_ok(r, c.out_en);  // flush
        if (c.intxfer_en) return rd_ready(r, c.rd_en);  // out_en is the lane id here
        return rd_ready(r, c.rd_en) && (c.out_en == 0 || outs_ok(r, c.out_en));
      case Mode::kSpWrite: return rd_ready(r, c.rd_en);
      case Mode::kSpRead: return outs_ok(r, c.out_en);
      case Mode::kPeIssue:
        if (r.pe_countdown > 0) return true;  // streaming in progress
        return pes_[r.id].out_pos >= pes_[r.id].outputs.size();  // engine idle
      default: return true;
    }
  }

  void emit(RouterState& r, std::uint8_t out_mask, const Flit& f) {
    unsigned copies = 0;
    for (unsigned p = 0; p < kPortCount; ++p) {
      if (!(out_mask & (1u << p))) continue;
      ++copies;
      switch (p) {
        case kPortN:
        case kPortE:
        case kPortS:
        case kPortW: {
          const int n = neighbor_of(r, p);
          if (n < 0) {
            ++r.dropped_flits;
            ++stats_.dropped;
          } else {
            routers_[n].fifos[opposite_port(p)].push(f);
            trace(cycle_, n, opposite_port(p), "push", f.payload);
          }
          break;
        }
        case kPortUp:
          if (r.has_tsv_up()) {
            scu_push(r.id, f.payload);
          } else {
            ++r.dropped_flits;
            ++stats_.dropped;
          }
          break;
        case kPortDown:
          if (r.has_tsv_down()) {
            egress_.push_back({cycle_, r.id, f.payload});
            ++stats_.egress;
            trace(cycle_, r.id, p, "egress", f.payload);
          } else {
            ++r.dropped_flits;
            ++stats_.dropped;
          }
          break;
        default:  // PE port has no egress side
          ++r.dropped_flits;
          ++stats_.dropped;
          break;
      }
    }
    if (copies > 1) stats_.fanout_extra += copies - 1;
  }

  void scu_push(unsigned router_id, Value payload) {
    auto& a = scus_[router_id];
    a.accepted_this_cycle = true;
    if (a.awaiting_header) {
      const Value slot = routers_[router_id].cfg(hw_, kCfgScuSlot);
      a.active = static_cast<unsigned>(slot) % a.slots.size();
      a.slots[a.active].begin(static_cast<std::size_t>(payload));
      a.awaiting_header = false;
      trace(cycle_, router_id, kPortUp, "scu_begin", payload);
    } else {
      a.slots[a.active].push(payload);
      if (!a.slots[a.active].collecting()) a.awaiting_header = true;
      trace(cycle_, router_id, kPortUp, "scu_in", payload);
    }
  }

  Flit pop(RouterState& r, unsigned port) {
    Flit f = r.fifos[port].pop();
    trace(cycle_, r.id, port, "pop", f.payload);
    return f;
  }

  void execute(RouterState& r) {
    Instruction& c = r.cmd;
    switch (c.mode()) {
      case Mode::kRoute: {
        const Flit f = pop(r, lowest_bit(c.rd_en));
        emit(r, c.out_en, f);
        if (c.intxfer_en) {
          r.sp_write(c.sp_addr, f.payload);
          ++stats_.stored;
          ++stats_.fanout_extra;  // the tap is a copy, like any other fanout
        }
        r.cmd_done = true;
        break;
      }
      case Mode::kPartialSum: {
        Value sum = 0;
        for (unsigned p = 0; p < kPortCount; ++p)
          if (c.rd_en & (1u << p)) sum += pop(r, p).payload;
        if (c.intxfer_en) sum += r.sp_read(c.sp_addr);
        if (c.out_en) {
          emit(r, c.out_en, Flit{sum, r.id, next_seq()});
        } else {
          r.sp_write(c.sp_addr, sum);
          ++stats_.stored;
        }
        r.cmd_done = true;
        break;
      }
      case Mode::kActivation: {
        const Flit f = pop(r, lowest_bit(c.rd_en));
        const Value slope = r.cfg(hw_, kCfgActSlope);
        const unsigned shift = static_cast<unsigned>(r.cfg(hw_, kCfgActShift)) & 63;
        const Value offset = r.cfg(hw_, kCfgActOffset);
        bool sat = false;
        Value y = shift_round(sat_mul(slope, f.payload, &sat), shift) + offset;
        if (sat) ++stats_.dmac_overflows;
        if (r.cfg(hw_, kCfgActClamp) != 0 && y < 0) y = 0;
        emit(r, c.out_en, Flit{y, r.id, next_seq()});
        if (c.intxfer_en) {
          r.sp_write(c.sp_addr, y);
          ++stats_.stored;
        }
        r.cmd_done = true;
        break;
      }
      case Mode::kDmac: {
        const unsigned lanes = r.macs.lanes();
        const unsigned dmac_shift = static_cast<unsigned>(r.cfg(hw_, kCfgDmacShift)) & 63;
        if (c.rd_en == 0) {  // flush
          const unsigned lane = c.sp_addr & (lanes - 1);
          const unsigned before = r.macs.overflows();
          const Value v = r.macs.flush(lane, dmac_shift);
          stats_.dmac_overflows += r.macs.overflows() - before;
          emit(r, c.out_en, Flit{v, r.id, next_seq()});
        } else if (c.intxfer_en) {  // port stream * scratchpad stream
          const Flit a = pop(r, lowest_bit(c.rd_en));
          const Value b = r.sp_read(c.sp_addr);
          const unsigned lane = c.out_en & (lanes - 1);
          const unsigned before = r.macs.overflows();
          r.macs.accumulate(lane, a.payload, b);
          stats_.dmac_overflows += r.macs.overflows() - before;
        } else if (c.out_en != 0) {  // elementwise product, no accumulator
          unsigned pa = lowest_bit(c.rd_en);
          unsigned pb = pa + 1;
          while (pb < kPortCount && !(c.rd_en & (1u << pb))) ++pb;
          if (pb >= kPortCount) throw Error("dmac elementwise form needs two rd_en ports");
          const Flit a = pop(r, pa);
          const Flit b = pop(r, pb);
          bool sat = false;
          const Value y = shift_round(sat_mul(a.payload, b.payload, &sat), dmac_shift);
          if (sat) ++stats_.dmac_overflows;
          emit(r, c.out_en, Flit{y, r.id, next_seq()});
        } else {  // two-port accumulate
          unsigned pa = lowest_bit(c.rd_en);
          unsigned pb = pa + 1;
          while (pb < kPortCount && !(c.rd_en & (1u << pb))) ++pb;
          if (pb >= kPortCount) throw Error("dmac accumulate needs two rd_en ports");
          const Flit a = pop(r, pa);
          const Flit b = pop(r, pb);
          const unsigned lane = c.sp_addr & (lanes - 1);
          const unsigned before = r.macs.overflows();
          r.macs.accumulate(lane, a.payload, b.payload);
          stats_.dmac_overflows += r.macs.overflows() - before;
        }
        r.cmd_done = true;
        break;
      }
      case Mode::kSpWrite: {
        const Flit f = pop(r, lowest_bit(c.rd_en));
        r.sp_write(c.sp_addr, f.payload);
        ++stats_.stored;
        r.cmd_done = true;
        break;
      }
      case Mode::kSpRead: {
        emit(r, c.out_en, Flit{r.sp_read(c.sp_addr), r.id, next_seq()});
        r.cmd_done = true;
        break;
      }
      case Mode::kPeIssue: {
        if (r.pe_countdown == 0) {
          // Latch the input vector; the issue occupies the router for the
          // configured streaming latency.
          std::vector<Value> x(hw_.pe_array);
          for (unsigned k = 0; k < hw_.pe_array; ++k)
            x[k] = r.sp_read(static_cast<std::uint16_t>(c.sp_addr + k));
          pe_inputs_[r.id] = std::move(x);
          r.pe_countdown = std::max(hw_.pe_issue_cycles, 1u);
        }
        if (--r.pe_countdown == 0) {
          auto& eng = pes_[r.id];
          eng.outputs = eng.array.smac(pe_inputs_[r.id]);
          eng.out_pos = 0;
          pe_inputs_.erase(r.id);
          r.cmd_done = true;
        }
        break;
      }
      default:
        r.cmd_done = true;
        break;
    }
  }

  void tick_engines() {
    // PE outputs drain into the PE ingress FIFO, one word per cycle.
    for (std::size_t i = 0; i < pes_.size(); ++i) {
      auto& eng = pes_[i];
      if (eng.out_pos < eng.outputs.size() && !routers_[i].fifos[kPortPE].full()) {
        routers_[i].fifos[kPortPE].push(
            Flit{eng.outputs[eng.out_pos], static_cast<std::uint32_t>(i), next_seq()});
        trace(cycle_, static_cast<unsigned>(i), kPortPE, "pe_out", eng.outputs[eng.out_pos]);
        ++eng.out_pos;
      }
    }
    // SCU outputs return through the TSV-up ingress.
    for (std::size_t i = 0; i < scus_.size(); ++i) {
      auto& a = scus_[i];
      if (a.slots.empty()) continue;
      auto& u = a.slots[a.active];
      if (u.pending_outputs() > 0 && !routers_[i].fifos[kPortUp].full()) {
        Value q30;
        u.pop(&q30);
        const Value out = hw_.numeric_mode == NumericMode::kFixed
                              ? shift_round(q30, kScuFracBits - hw_.frac_bits)
                              : q30;
        routers_[i].fifos[kPortUp].push(Flit{out, static_cast<std::uint32_t>(i), next_seq()});
        trace(cycle_, static_cast<unsigned>(i), kPortUp, "scu_out", out);
      }
    }
    // Staged injections trickle into the TSV-down ingress.
    for (std::size_t i = 0; i < staged_.size(); ++i) {
      auto& q = staged_[i];
      if (!q.empty() && q.front().not_before <= cycle_ &&
          !routers_[i].fifos[kPortDown].full()) {
        routers_[i].fifos[kPortDown].push(q.front().flit);
        trace(cycle_, static_cast<unsigned>(i), kPortDown, "inject", q.front().flit.payload);
        q.pop_front();
      }
    }
  }

  std::uint32_t next_seq() { return seq_++; }
  void trace(Cycle cy, unsigned router, unsigned port, const char* ev, Value v) {
    if (trace_) trace_(cy, router, port, ev, v);
  }

  HardwareConfig hw_;
  NpmController controller_;
  std::vector<RouterState> routers_;
  std::vector<PeEngine> pes_;
  std::unique_ptr<PwlTable> pwl_;
  std::vector<ScuAdapter> scus_;
  std::vector<std::deque<Injection>> staged_;
  std::map<unsigned, std::vector<Value>> pe_inputs_;

  std::vector<std::array<std::uint16_t, kPortCount>> sizes_;
  std::vector<bool> scu_accept_;
  std::vector<bool> fires_;
  bool iteration_loaded_ = false;

  Cycle cycle_ = 0;
  std::uint32_t seq_ = 1;
  std::uint32_t inj_seq_ = 1;
  TileStats stats_;
  std::vector<C2CEgressRecord> egress_;
  TraceFn trace_;
};

}  // namespace picnic
