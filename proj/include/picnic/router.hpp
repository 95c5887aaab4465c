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

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"
#include "picnic/isa.hpp"

namespace picnic {

// A 64-bit word in flight. The tag travels out-of-band; nothing in the
// datapath reads it.
struct Flit {
  Value payload = 0;
  std::uint32_t src_router = 0;
  std::uint32_t seq = 0;
};

class Fifo {
 public:
  explicit Fifo(unsigned capacity = 32) : capacity_(capacity) {}
  bool empty() const { return q_.empty(); }
  bool full() const { return q_.size() >= capacity_; }
  std::size_t size() const { return q_.size(); }
  unsigned capacity() const { return capacity_; }
  const Flit& front() const { return q_.front(); }
  Flit pop() {
    Flit f = q_.front();
    q_.pop_front();
    return f;
  }
  void push(const Flit& f) {
    if (full()) throw Error("FIFO overflow (backpressure hole)");
    q_.push_back(f);
  }

 private:
  unsigned capacity_;
  std::deque<Flit> q_;
};

// ---------------------------------------------------------------------------
// Non-weighted MAC array: independent accumulator lanes for dynamic-data
// multiply-accumulate. Saturates on 64-bit overflow and records the event.
// ---------------------------------------------------------------------------

class MacArray {
 public:
  explicit MacArray(unsigned lanes = 16) : acc_(lanes, 0) {}

  unsigned lanes() const { return static_cast<unsigned>(acc_.size()); }
  unsigned overflows() const { return overflows_; }
  Value peek(unsigned lane) const { return acc_.at(lane); }

  void accumulate(unsigned lane, Value a, Value b) {
    bool sat = false;
    const Value p = sat_mul(a, b, &sat);
    acc_.at(lane) = sat_add(acc_[lane], p, &sat);
    if (sat) ++overflows_;
  }

  Value flush(unsigned lane, unsigned shift) {
    const Value v = shift_round(acc_.at(lane), shift);
    acc_[lane] = 0;
    return v;
  }

  // Parallel step: one (a, b) pair per lane per cycle.
  void step(const std::vector<std::optional<std::pair<Value, Value>>>& lane_inputs) {
    for (std::size_t l = 0; l < lane_inputs.size() && l < acc_.size(); ++l)
      if (lane_inputs[l]) accumulate(static_cast<unsigned>(l), lane_inputs[l]->first,
                                     lane_inputs[l]->second);
  }

 private:
  std::vector<Value> acc_;
  unsigned overflows_ = 0;
};

// ---------------------------------------------------------------------------
// Macro configuration registers.
//
// The affine-activation and DMAC macros take parameters from a reserved
// region at the top of the scratchpad, written with ordinary scratchpad-write
// commands. Offsets below are relative to scratchpad_words - kCfgWords.
// ---------------------------------------------------------------------------

constexpr unsigned kCfgWords = 16;
enum CfgSlot : unsigned {
  kCfgActSlope = 0,
  kCfgActShift = 1,
  kCfgActOffset = 2,
  kCfgActClamp = 3,
  kCfgDmacShift = 4,
  kCfgScuSlot = 5,
};

inline std::uint16_t cfg_addr(const HardwareConfig& hw, unsigned slot) {
  return static_cast<std::uint16_t>(hw.scratchpad_words - kCfgWords + slot);
}

// ---------------------------------------------------------------------------
// Per-router state: seven ingress FIFOs (one per port, single producer each),
// the scratchpad, the MAC array, and the execution state of the currently
// dispatched command. Each command iteration performs one unit action; the
// NMC's repeat counter advances when every selected router raised done.
// ---------------------------------------------------------------------------

struct RouterState {
  RouterState(const HardwareConfig& hw, unsigned id_, unsigned row_, unsigned col_)
      : id(id_),
        row(row_),
        col(col_),
        scratchpad(hw.scratchpad_words, 0),
        macs(hw.macs_per_router),
        fifos{Fifo(hw.fifo_depth), Fifo(hw.fifo_depth), Fifo(hw.fifo_depth),
              Fifo(hw.fifo_depth), Fifo(hw.fifo_depth), Fifo(hw.fifo_depth),
              Fifo(hw.fifo_depth)} {}

  unsigned id;
  unsigned row;
  unsigned col;
  bool has_tsv_up() const { return col % 2 == 1; }    // odd columns reach the SCU die
  bool has_tsv_down() const { return col % 2 == 0; }  // even columns reach the optical die

  std::vector<Value> scratchpad;
  MacArray macs;
  std::array<Fifo, kPortCount> fifos;

  // Command execution state for the current row iteration.
  Instruction cmd;
  bool cmd_done = true;
  unsigned pe_countdown = 0;  // remaining PE-issue cycles

  // Flags and counters.
  unsigned dropped_flits = 0;  // pushes out of an unconnected port or mesh edge

  Value sp_read(std::uint16_t addr) const { return scratchpad[addr & (scratchpad.size() - 1)]; }
  void sp_write(std::uint16_t addr, Value v) { scratchpad[addr & (scratchpad.size() - 1)] = v; }

  Value cfg(const HardwareConfig& hw, unsigned slot) const {
    return scratchpad[hw.scratchpad_words - kCfgWords + slot];
  }
};

inline unsigned opposite_port(unsigned p) {
  switch (p) {
    case kPortN: return kPortS;
    case kPortE: return kPortW;
    case kPortS: return kPortN;
    case kPortW: return kPortE;
    default: return p;
  }
}

}  // namespace picnic
