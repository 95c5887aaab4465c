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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "picnic/common.hpp"
#include "picnic/config.hpp"

namespace picnic {

enum class TileMode { kFull, kScratchpadOnly };

// Utilization-weighted tile power: only mapped router-PE pairs draw active
// power; a sleeping tile keeps exactly its scratchpad modules alive.
inline double tile_power_w(const HardwareConfig& hw, double utilization, TileMode mode,
                           unsigned scus_active) {
  if (utilization < 0.0 || utilization > 1.0) throw Error("utilization out of [0,1]");
  const double pairs = double(hw.router_count());
  if (mode == TileMode::kScratchpadOnly)
    return pairs * hw.costs.scratchpad_uw * 1e-6;
  return (utilization * pairs * hw.costs.pair_uw() + double(scus_active) * hw.costs.scu_uw) *
         1e-6;
}

inline double tile_area_mm2(const HardwareConfig& hw) {
  return double(hw.router_count()) * hw.costs.pair_mm2();
}

// ---------------------------------------------------------------------------
// CCPG cluster state: groups of adjacent compute tiles, exactly one fully
// awake during steady-state execution. Weights are non-volatile, so waking a
// cluster costs only the configured transition energy.
// ---------------------------------------------------------------------------

struct ClusterState {
  unsigned cluster_size = 4;
  unsigned tile_count = 0;
  int active_cluster = -1;
  std::vector<TileMode> mode;  // per tile
  unsigned transitions = 0;
  double transition_energy_pj = 0.0;

  unsigned cluster_count() const {
    return (tile_count + cluster_size - 1) / cluster_size;
  }
  unsigned cluster_of(unsigned tile) const { return tile / cluster_size; }
};

inline ClusterState make_cluster_state(const HardwareConfig& hw, unsigned tiles) {
  ClusterState s;
  s.cluster_size = hw.cluster_size;
  s.tile_count = tiles;
  s.mode.assign(tiles, TileMode::kScratchpadOnly);
  return s;
}

// Advances execution into the tile holding the next layer: its cluster wakes,
// the previous one drops to scratchpad retention.
inline void ccpg_step(ClusterState& s, unsigned next_tile, double wake_cost_pj = 0.0) {
  if (next_tile >= s.tile_count) throw Error("layer mapped to an unknown tile");
  const int cluster = static_cast<int>(s.cluster_of(next_tile));
  if (cluster == s.active_cluster) return;
  for (unsigned t = 0; t < s.tile_count; ++t)
    s.mode[t] = static_cast<int>(s.cluster_of(t)) == cluster ? TileMode::kFull
                                                             : TileMode::kScratchpadOnly;
  s.active_cluster = cluster;
  ++s.transitions;
  s.transition_energy_pj += wake_cost_pj;
}

// ---------------------------------------------------------------------------
// Energy ledger: per-macro-class and per-phase accumulation with derived
// whole-run metrics.
// ---------------------------------------------------------------------------

class EnergyLedger {
 public:
  void add(const std::string& macro_class, const std::string& phase, double pj) {
    if (pj < 0) throw Error("negative energy entry");
    by_class_[macro_class] += pj;
    by_phase_[phase] += pj;
    total_pj_ += pj;
  }

  void set_cycles(Cycle c) { cycles_ = c; }
  void set_tokens(std::uint64_t t) { tokens_ = t; }
  Cycle cycles() const { return cycles_; }
  std::uint64_t tokens() const { return tokens_; }

  double total_pj() const { return total_pj_; }
  const std::map<std::string, double>& by_class() const { return by_class_; }
  const std::map<std::string, double>& by_phase() const { return by_phase_; }

  double seconds(double frequency_ghz) const {
    return double(cycles_) * 1e-9 / frequency_ghz;
  }
  double average_power_w(double frequency_ghz) const {
    const double s = seconds(frequency_ghz);
    return s > 0 ? total_pj_ * 1e-12 / s : 0.0;
  }
  double throughput_tps(double frequency_ghz) const {
    const double s = seconds(frequency_ghz);
    return s > 0 ? double(tokens_) / s : 0.0;
  }
  double efficiency_tpj(double frequency_ghz) const {
    const double p = average_power_w(frequency_ghz);
    return p > 0 ? throughput_tps(frequency_ghz) / p : 0.0;
  }

  // Additivity check: the class breakdown sums to the total exactly (same
  // additions, same order).
  bool additive() const {
    double sum = 0;
    for (const auto& [k, v] : by_class_) sum += v;
    return std::abs(sum - total_pj_) <= 1e-6 * std::max(1.0, total_pj_);
  }

 private:
  std::map<std::string, double> by_class_;
  std::map<std::string, double> by_phase_;
  double total_pj_ = 0.0;
  Cycle cycles_ = 0;
  std::uint64_t tokens_ = 0;
};

}  // namespace picnic
