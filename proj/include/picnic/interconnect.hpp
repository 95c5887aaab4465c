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

#include <cstdint>
#include <string>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"

namespace picnic {

// Chip-to-chip fabric: logical all-to-all links between compute tiles plus a
// DRAM hub, with bandwidth, latency and energy-per-bit accounting. Physical
// switching is not modeled; a transfer is a bandwidth-limited burst.

constexpr int kDramHub = -1;

struct C2CLink {
  int src = 0;
  int dst = 0;
  std::uint64_t bandwidth_bits_per_cycle = 64;
  std::uint64_t latency_cycles = 8;
  double energy_per_bit_pj = 3.0;
  LinkKind kind = LinkKind::kElectrical;
};

struct TransferEvent {
  int src = 0;
  int dst = 0;
  std::uint64_t bits = 0;
  Cycle start = 0;
  Cycle end = 0;
  double energy_pj = 0.0;
};

// One transfer over a link; DRAM endpoints add the access energy on top of
// the link energy.
inline TransferEvent transfer(const C2CLink& link, std::uint64_t bits, Cycle at,
                              double dram_pj_per_bit) {
  TransferEvent ev;
  ev.src = link.src;
  ev.dst = link.dst;
  ev.bits = bits;
  ev.start = at;
  const std::uint64_t serialization =
      link.bandwidth_bits_per_cycle == 0
          ? 0
          : (bits + link.bandwidth_bits_per_cycle - 1) / link.bandwidth_bits_per_cycle;
  ev.end = at + link.latency_cycles + serialization;
  ev.energy_pj = double(bits) * link.energy_per_bit_pj;
  if (link.src == kDramHub || link.dst == kDramHub)
    ev.energy_pj += double(bits) * dram_pj_per_bit;
  return ev;
}

class Interconnect {
 public:
  Interconnect(const HardwareConfig& hw, int tile_count)
      : hw_(hw), tiles_(tile_count) {}

  // Barrier rule: a tile's transfer starts only after its mesh phase is done,
  // which the caller encodes in `at`.
  const TransferEvent& send(int src, int dst, std::uint64_t bits, Cycle at) {
    if ((src != kDramHub && (src < 0 || src >= tiles_)) ||
        (dst != kDramHub && (dst < 0 || dst >= tiles_)))
      throw Error("transfer endpoint outside the topology");
    C2CLink link;
    link.src = src;
    link.dst = dst;
    link.bandwidth_bits_per_cycle = hw_.c2c.bandwidth_bits_per_cycle;
    link.latency_cycles = hw_.c2c.latency_cycles;
    link.kind = hw_.interconnect;
    link.energy_per_bit_pj = hw_.c2c.pj_per_bit(hw_.interconnect);
    log_.push_back(transfer(link, bits, at, hw_.c2c.dram_pj_per_bit));
    total_pj_ += log_.back().energy_pj;
    return log_.back();
  }

  const std::vector<TransferEvent>& log() const { return log_; }
  double total_energy_pj() const { return total_pj_; }

 private:
  HardwareConfig hw_;
  int tiles_;
  std::vector<TransferEvent> log_;
  double total_pj_ = 0.0;
};

struct C2CPowerProfile {
  Cycle window = 0;
  std::vector<double> watts;  // one entry per window
  double average_w = 0.0;
};

// Windowed average C2C power. Each event's energy spreads uniformly over its
// [start, end) span; empty logs give an all-zero series.
inline C2CPowerProfile c2c_power_profile(const std::vector<TransferEvent>& log, Cycle window,
                                         Cycle total_cycles, double frequency_ghz) {
  C2CPowerProfile p;
  p.window = window;
  if (window == 0 || total_cycles == 0) return p;
  const std::size_t n = static_cast<std::size_t>((total_cycles + window - 1) / window);
  p.watts.assign(n, 0.0);
  const double cycle_s = 1e-9 / frequency_ghz;
  double total_pj = 0.0;
  for (const auto& ev : log) {
    total_pj += ev.energy_pj;
    const Cycle span = ev.end > ev.start ? ev.end - ev.start : 1;
    const double pj_per_cycle = ev.energy_pj / double(span);
    Cycle c = ev.start;
    while (c < ev.end) {
      const std::size_t w = static_cast<std::size_t>(c / window);
      const Cycle w_end = (Cycle(w) + 1) * window;
      const Cycle chunk = std::min(ev.end, w_end) - c;
      if (w < n) p.watts[w] += pj_per_cycle * double(chunk);
      c += chunk;
    }
  }
  for (auto& w : p.watts) w = w * 1e-12 / (double(window) * cycle_s);
  p.average_w = total_pj * 1e-12 / (double(total_cycles) * cycle_s);
  return p;
}

}  // namespace picnic
