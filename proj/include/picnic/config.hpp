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
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "picnic/common.hpp"

namespace picnic {

enum class NumericMode { kExact, kFixed };

inline std::string to_string(NumericMode m) {
  return m == NumericMode::kExact ? "exact" : "fixed";
}

inline NumericMode numeric_mode_from_string(const std::string& s) {
  if (s == "exact") return NumericMode::kExact;
  if (s == "fixed") return NumericMode::kFixed;
  throw ConfigError("unknown numeric mode: " + s);
}

enum class LinkKind { kElectrical, kOptical };

inline std::string to_string(LinkKind k) {
  return k == LinkKind::kElectrical ? "electrical" : "optical";
}

inline LinkKind link_kind_from_string(const std::string& s) {
  if (s == "electrical") return LinkKind::kElectrical;
  if (s == "optical") return LinkKind::kOptical;
  throw ConfigError("unknown interconnect kind: " + s);
}

// Per-unit active power (uW) and area (mm^2) of the compute-tile macros.
struct UnitCosts {
  double pe_uw = 120.0;
  double scratchpad_uw = 42.0;
  double router_uw = 97.0;
  double scu_uw = 5.31;

  double pe_mm2 = 0.1442;
  double scratchpad_mm2 = 0.013;
  double router_mm2 = 0.025;
  double tsv_mm2 = 0.002;
  double scu_mm2 = 0.041;

  double pair_uw() const { return pe_uw + scratchpad_uw + router_uw; }
  double pair_mm2() const { return pe_mm2 + scratchpad_mm2 + router_mm2 + tsv_mm2; }
};

// Chip-to-chip link parameters. Electrical and optical share bandwidth and
// latency by default so runs differ only in energy.
struct C2CConfig {
  double electrical_pj_per_bit = 3.0;
  double optical_pj_per_bit = 0.5;
  double dram_pj_per_bit = 30.0;
  std::uint64_t bandwidth_bits_per_cycle = 64;
  std::uint64_t latency_cycles = 8;

  double pj_per_bit(LinkKind kind) const {
    return kind == LinkKind::kElectrical ? electrical_pj_per_bit : optical_pj_per_bit;
  }
};

// Full hardware description. Defaults are the published system parameters;
// desk-scale presets shrink the mesh and PE arrays for exhaustive testing.
struct HardwareConfig {
  double frequency_ghz = 1.0;

  // Tile level.
  unsigned mesh_rows = 32;
  unsigned mesh_cols = 32;
  unsigned scus_per_odd_router = 2;

  // Macro level (per router-PE pair).
  unsigned pe_array = 256;          // square crossbar side
  unsigned fifo_depth = 32;         // flits (256 B of 64-bit words)
  unsigned scratchpad_words = 4096; // 32 KB of 64-bit words
  unsigned macs_per_router = 16;

  // PE timing/quantization.
  unsigned pe_issue_cycles = 256;   // cycles to stream one input vector
  unsigned adc_bits = 8;            // 0 disables output quantization
  double adc_full_scale = 0.0;      // 0 = auto-calibrated per programmed array
  double calibration_offset_fraction = 0.02;  // of ADC full scale

  // Numerics.
  NumericMode numeric_mode = NumericMode::kFixed;
  unsigned frac_bits = 16;          // payload Q-format in fixed mode
  unsigned weight_frac_bits = 6;    // int8 weights interpreted as Q2.6
  unsigned kv_bits = 16;            // stored KV entry width (capacity model)
  unsigned kv_entries_per_word = 2;

  // SCU.
  unsigned scu_cache_capacity = 4096;
  unsigned scu_pwl_segments = 8;
  double scu_domain_min = -8.0;

  // Program memory.
  unsigned npm_rows_per_bank = 1024;
  unsigned coprocessor_rows_per_cycle = 1;

  // CCPG.
  bool ccpg_enabled = false;
  unsigned cluster_size = 4;        // chiplets per cluster
  double wake_cost_pj = 0.0;

  // Energy bookkeeping knobs without published values.
  double pe_program_pj = 0.0;

  C2CConfig c2c;
  LinkKind interconnect = LinkKind::kElectrical;
  UnitCosts costs;

  unsigned router_count() const { return mesh_rows * mesh_cols; }
  unsigned scu_count() const {
    return (mesh_cols / 2) * mesh_rows * scus_per_odd_router;
  }
  double cycle_seconds() const { return 1e-9 / frequency_ghz; }

  void validate() const {
    if (mesh_rows == 0 || mesh_cols == 0) throw ConfigError("mesh dims must be positive");
    if (mesh_cols % 2 != 0) throw ConfigError("mesh_cols must be even (TSV column alternation)");
    if (pe_array == 0) throw ConfigError("pe_array must be positive");
    if (fifo_depth == 0) throw ConfigError("fifo_depth must be positive");
    if (scratchpad_words == 0 || (scratchpad_words & (scratchpad_words - 1)) != 0)
      throw ConfigError("scratchpad_words must be a power of two");
    if (frac_bits >= 32) throw ConfigError("frac_bits must be < 32");
    if (macs_per_router == 0 || (macs_per_router & (macs_per_router - 1)) != 0)
      throw ConfigError("macs_per_router must be a power of two");
  }

  // Small mesh / small PE preset used by the functional end-to-end tests.
  static HardwareConfig desk() {
    HardwareConfig hw;
    hw.mesh_rows = 16;
    hw.mesh_cols = 16;
    hw.pe_array = 16;
    hw.pe_issue_cycles = 16;
    hw.adc_bits = 0;
    hw.kv_bits = 64;
    hw.kv_entries_per_word = 1;
    hw.npm_rows_per_bank = 4096;
    return hw;
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. Only keys present in the file override defaults, so
// preset files stay small.
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void get_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace detail

inline HardwareConfig hardware_from_json(const nlohmann::json& j) {
  HardwareConfig hw;
  using detail::get_opt;
  get_opt(j, "frequency_ghz", hw.frequency_ghz);
  get_opt(j, "mesh_rows", hw.mesh_rows);
  get_opt(j, "mesh_cols", hw.mesh_cols);
  get_opt(j, "scus_per_odd_router", hw.scus_per_odd_router);
  get_opt(j, "pe_array", hw.pe_array);
  get_opt(j, "fifo_depth", hw.fifo_depth);
  get_opt(j, "scratchpad_words", hw.scratchpad_words);
  get_opt(j, "macs_per_router", hw.macs_per_router);
  get_opt(j, "pe_issue_cycles", hw.pe_issue_cycles);
  get_opt(j, "adc_bits", hw.adc_bits);
  get_opt(j, "adc_full_scale", hw.adc_full_scale);
  get_opt(j, "calibration_offset_fraction", hw.calibration_offset_fraction);
  if (j.contains("numeric_mode"))
    hw.numeric_mode = numeric_mode_from_string(j.at("numeric_mode").get<std::string>());
  get_opt(j, "frac_bits", hw.frac_bits);
  get_opt(j, "weight_frac_bits", hw.weight_frac_bits);
  get_opt(j, "kv_bits", hw.kv_bits);
  get_opt(j, "kv_entries_per_word", hw.kv_entries_per_word);
  get_opt(j, "scu_cache_capacity", hw.scu_cache_capacity);
  get_opt(j, "scu_pwl_segments", hw.scu_pwl_segments);
  get_opt(j, "scu_domain_min", hw.scu_domain_min);
  get_opt(j, "npm_rows_per_bank", hw.npm_rows_per_bank);
  get_opt(j, "coprocessor_rows_per_cycle", hw.coprocessor_rows_per_cycle);
  get_opt(j, "ccpg_enabled", hw.ccpg_enabled);
  get_opt(j, "cluster_size", hw.cluster_size);
  get_opt(j, "wake_cost_pj", hw.wake_cost_pj);
  get_opt(j, "pe_program_pj", hw.pe_program_pj);
  if (j.contains("interconnect"))
    hw.interconnect = link_kind_from_string(j.at("interconnect").get<std::string>());
  if (j.contains("c2c")) {
    const auto& c = j.at("c2c");
    get_opt(c, "electrical_pj_per_bit", hw.c2c.electrical_pj_per_bit);
    get_opt(c, "optical_pj_per_bit", hw.c2c.optical_pj_per_bit);
    get_opt(c, "dram_pj_per_bit", hw.c2c.dram_pj_per_bit);
    get_opt(c, "bandwidth_bits_per_cycle", hw.c2c.bandwidth_bits_per_cycle);
    get_opt(c, "latency_cycles", hw.c2c.latency_cycles);
  }
  if (j.contains("costs")) {
    const auto& c = j.at("costs");
    get_opt(c, "pe_uw", hw.costs.pe_uw);
    get_opt(c, "scratchpad_uw", hw.costs.scratchpad_uw);
    get_opt(c, "router_uw", hw.costs.router_uw);
    get_opt(c, "scu_uw", hw.costs.scu_uw);
    get_opt(c, "pe_mm2", hw.costs.pe_mm2);
    get_opt(c, "scratchpad_mm2", hw.costs.scratchpad_mm2);
    get_opt(c, "router_mm2", hw.costs.router_mm2);
    get_opt(c, "tsv_mm2", hw.costs.tsv_mm2);
    get_opt(c, "scu_mm2", hw.costs.scu_mm2);
  }
  hw.validate();
  return hw;
}

inline nlohmann::json hardware_to_json(const HardwareConfig& hw) {
  nlohmann::json j;
  j["frequency_ghz"] = hw.frequency_ghz;
  j["mesh_rows"] = hw.mesh_rows;
  j["mesh_cols"] = hw.mesh_cols;
  j["scus_per_odd_router"] = hw.scus_per_odd_router;
  j["pe_array"] = hw.pe_array;
  j["fifo_depth"] = hw.fifo_depth;
  j["scratchpad_words"] = hw.scratchpad_words;
  j["macs_per_router"] = hw.macs_per_router;
  j["pe_issue_cycles"] = hw.pe_issue_cycles;
  j["adc_bits"] = hw.adc_bits;
  j["numeric_mode"] = to_string(hw.numeric_mode);
  j["frac_bits"] = hw.frac_bits;
  j["weight_frac_bits"] = hw.weight_frac_bits;
  j["kv_bits"] = hw.kv_bits;
  j["kv_entries_per_word"] = hw.kv_entries_per_word;
  j["scu_cache_capacity"] = hw.scu_cache_capacity;
  j["scu_pwl_segments"] = hw.scu_pwl_segments;
  j["scu_domain_min"] = hw.scu_domain_min;
  j["npm_rows_per_bank"] = hw.npm_rows_per_bank;
  j["ccpg_enabled"] = hw.ccpg_enabled;
  j["cluster_size"] = hw.cluster_size;
  j["wake_cost_pj"] = hw.wake_cost_pj;
  j["interconnect"] = to_string(hw.interconnect);
  j["c2c"] = {{"electrical_pj_per_bit", hw.c2c.electrical_pj_per_bit},
              {"optical_pj_per_bit", hw.c2c.optical_pj_per_bit},
              {"dram_pj_per_bit", hw.c2c.dram_pj_per_bit},
              {"bandwidth_bits_per_cycle", hw.c2c.bandwidth_bits_per_cycle},
              {"latency_cycles", hw.c2c.latency_cycles}};
  j["costs"] = {{"pe_uw", hw.costs.pe_uw},
                {"scratchpad_uw", hw.costs.scratchpad_uw},
                {"router_uw", hw.costs.router_uw},
                {"scu_uw", hw.costs.scu_uw},
                {"pe_mm2", hw.costs.pe_mm2},
                {"scratchpad_mm2", hw.costs.scratchpad_mm2},
                {"router_mm2", hw.costs.router_mm2},
                {"tsv_mm2", hw.costs.tsv_mm2},
                {"scu_mm2", hw.costs.scu_mm2}};
  return j;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

inline void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

}  // namespace picnic
