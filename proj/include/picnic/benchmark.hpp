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

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "picnic/interconnect.hpp"
#include "picnic/mapper.hpp"
#include "picnic/model.hpp"
#include "picnic/power.hpp"
#include "picnic/runner.hpp"
#include "picnic/schedule.hpp"

namespace picnic {

// ---------------------------------------------------------------------------
// Run configuration: everything an inference benchmark needs, fully seeded.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string model = "llama-1b";  // preset name or path to a model json
  unsigned prompt_len = 512;
  unsigned gen_len = 512;
  bool ccpg = false;
  LinkKind interconnect = LinkKind::kElectrical;
  NumericMode numeric = NumericMode::kFixed;
  std::uint64_t seed = 1;
  std::string engine = "auto";  // "cycle" | "phase" | "auto"
  HardwareConfig hw;

  void validate() const {
    if (prompt_len < 1 || gen_len < 1) throw ConfigError("prompt_len and gen_len must be >= 1");
    if (engine != "auto" && engine != "cycle" && engine != "phase")
      throw ConfigError("engine must be auto, cycle or phase");
  }
};

struct RunResult {
  std::string model_name;
  unsigned prompt_len = 0, gen_len = 0;
  bool ccpg = false;
  LinkKind interconnect = LinkKind::kElectrical;
  std::string engine;

  unsigned chiplets = 0;
  unsigned clusters = 0;
  double area_mm2_per_tile = 0.0;

  Cycle total_cycles = 0;
  double throughput_tps = 0.0;
  double avg_power_w = 0.0;       // for the configured CCPG setting
  double efficiency_tpj = 0.0;
  double power_ccpg_w = 0.0;      // averages under both gating settings,
  double power_no_ccpg_w = 0.0;   // from the same timeline
  double c2c_avg_power_w = 0.0;
  double c2c_total_pj = 0.0;
  unsigned ccpg_transitions = 0;
  bool ccpg_power_never_exceeds = true;  // instantaneous p_ccpg <= p_plain

  EnergyLedger ledger;
  std::vector<TransferEvent> transfers;
  C2CPowerProfile c2c_profile;
  std::vector<std::pair<double, double>> power_series;  // (ccpg W, plain W), downsampled
  nlohmann::json plan_dump;

  // Cycle-engine extras: attention outputs of the first layer, per token.
  std::vector<std::vector<Value>> attention_outputs;
};

// ---------------------------------------------------------------------------
// Analytic per-chiplet cycle model, derived from the chiplet's placement.
// The inner attention loop spreads over the station MAC lanes and the cached
// value streams over the V owners; projections and collectives come from the
// plan geometry.
// ---------------------------------------------------------------------------

namespace detail_bm {

inline unsigned manhattan(unsigned a, unsigned b, unsigned cols) {
  const int ar = int(a / cols), ac = int(a % cols);
  const int br = int(b / cols), bc = int(b % cols);
  return unsigned(std::abs(ar - br) + std::abs(ac - bc));
}

}  // namespace detail_bm

struct ChipletModel {
  ChipletLoad load;
  double utilization = 0.0;
  bool attention = false;
  unsigned scus_active = 0;

  // Attention parameters.
  unsigned heads = 1, head_dim = 1, unroll_total = 1, v_parallel = 1, avg_hops = 4;
  Cycle fixed_cycles = 0;   // per-step cost independent of the context
  std::uint64_t out_bits = 0;  // layer handoff per decode step

  Cycle step_cycles(unsigned context) const {
    if (!attention) return fixed_cycles;
    Cycle c = fixed_cycles;
    const Cycle scores =
        AttentionScheduler::score_stream_cycles(context, head_dim, avg_hops, unroll_total);
    const Cycle softmax = 3 * Cycle(context) + kRecipCycles;
    const unsigned vp = std::max(1u, std::min(v_parallel, context));
    const Cycle sv = Cycle((context + vp - 1) / vp) * (head_dim + 8);
    c += Cycle(heads) * (scores + softmax + sv);
    return c;
  }
};

inline ChipletModel build_chiplet_model(const ChipletLoad& load, const HardwareConfig& hw,
                                        const ModelSpec& model) {
  ChipletModel cm;
  cm.load = load;
  cm.utilization = double(load.tiles) / hw.router_count();
  cm.attention = load.uses_scu;
  cm.scus_active = load.uses_scu ? hw.scu_count() : 0;

  // Place the chiplet's parts to derive the geometry constants.
  std::vector<PlacementRequest> req;
  for (const auto& p : load.parts)
    req.push_back({p.id, p.layer_index, TileGrid{p.grid_rows, p.grid_cols}});
  const MappingPlan plan = place(req, hw, load.uses_scu ? LayerKind::kAttention
                                                        : LayerKind::kFeedForward);

  const unsigned P = hw.pe_array;
  Cycle fixed = 0;
  unsigned stream_count = 0;
  for (const auto& m : plan.matrices) {
    // Input broadcast: one tile vector per row-group member; groups run
    // concurrently across the mesh rows.
    for (unsigned tr = 0; tr < m.grid.rows; ++tr) stream_count += m.grid.cols;
    // Output reduce: members minus the head per column.
    for (unsigned tc = 0; tc < m.grid.cols; ++tc) stream_count += m.grid.rows - 1;
  }
  const unsigned stream_parallel = std::max(1u, hw.mesh_rows / 2);
  fixed += Cycle((stream_count + stream_parallel - 1) / stream_parallel) * (P + 8);
  fixed += hw.pe_issue_cycles + P;  // SMAC issue + drain
  cm.fixed_cycles = fixed;

  if (cm.attention) {
    cm.heads = model.num_heads;
    cm.head_dim = model.head_dim();
    // Unroll pool: MAC lanes across the query channel's routers.
    unsigned q_routers = 0;
    for (const auto& m : plan.matrices)
      if (m.id == MatrixId::kWQ) q_routers = unsigned(m.routers(hw.mesh_cols).size());
    cm.unroll_total = std::max(1u, q_routers * hw.macs_per_router);
    unsigned v_routers = 0;
    for (const auto& m : plan.matrices)
      if (m.id == MatrixId::kWV) v_routers = unsigned(m.routers(hw.mesh_cols).size());
    cm.v_parallel = std::max(1u, v_routers);
    cm.avg_hops = (hw.mesh_rows + hw.mesh_cols) / 4;
  }
  cm.out_bits = std::uint64_t(model.embed_dim) * 64;
  return cm;
}

// Analytic KV budget per attention layer: the layer's chiplets share the
// cyclic owner window.
inline void check_kv_budget(const ModelSpec& model, const HardwareConfig& hw,
                            const std::vector<ChipletModel>& chiplets, unsigned max_context) {
  const unsigned epw = std::max(1u, hw.kv_entries_per_word);
  const std::uint64_t words_per_vec = (model.kv_dim + epw - 1) / epw;
  const std::uint64_t window = hw.scratchpad_words - 16 - kv_window_base(hw);
  const std::uint64_t tokens_per_owner = window / words_per_vec;

  std::map<unsigned, unsigned> attn_chiplets_per_layer;  // layer_index -> count
  for (const auto& cm : chiplets)
    for (const auto& p : cm.load.parts)
      if (p.kind == LayerKind::kAttention) {
        attn_chiplets_per_layer[p.layer_index]++;
        break;  // count each chiplet once per layer
      }
  for (const auto& [layer, n] : attn_chiplets_per_layer) {
    // K and V owner sets split the chiplet pool evenly.
    const std::uint64_t owners = std::uint64_t(n) * hw.router_count() / 2;
    const std::uint64_t capacity = owners * tokens_per_owner;
    if (capacity < max_context)
      throw CapacityError("KV capacity exceeded for layer " + std::to_string(layer) +
                          ": max context " + std::to_string(capacity) + " < " +
                          std::to_string(max_context));
  }
}

// ---------------------------------------------------------------------------
// Phase-level engine: walks the prefill and decode timeline layer by layer,
// charging utilization-weighted power for the elapsed span and logging every
// C2C handoff. All arithmetic, no randomness: byte-stable outputs.
// ---------------------------------------------------------------------------

inline RunResult run_phase_engine(const RunConfig& cfg, const ModelSpec& model) {
  const HardwareConfig& hw = cfg.hw;
  RunResult r;
  r.model_name = model.name;
  r.prompt_len = cfg.prompt_len;
  r.gen_len = cfg.gen_len;
  r.ccpg = cfg.ccpg;
  r.interconnect = hw.interconnect;
  r.engine = "phase";
  r.area_mm2_per_tile = tile_area_mm2(hw);

  const auto loads = assign_chiplets(model, hw);
  std::vector<ChipletModel> chiplets;
  for (const auto& l : loads) chiplets.push_back(build_chiplet_model(l, hw, model));
  r.chiplets = unsigned(chiplets.size());
  r.clusters = (r.chiplets + hw.cluster_size - 1) / hw.cluster_size;
  check_kv_budget(model, hw, chiplets, cfg.prompt_len + cfg.gen_len);

  // Static power components.
  const double sleep_w_per_tile = double(hw.router_count()) * hw.costs.scratchpad_uw * 1e-6;
  double plain_total_w = 0.0;  // whole system, no gating
  for (const auto& cm : chiplets)
    plain_total_w += tile_power_w(hw, cm.utilization, TileMode::kFull, cm.scus_active);

  auto cluster_power_w = [&](unsigned cluster) {
    double w = 0.0;
    for (unsigned i = cluster * hw.cluster_size;
         i < std::min<unsigned>((cluster + 1) * hw.cluster_size, r.chiplets); ++i)
      w += tile_power_w(hw, chiplets[i].utilization, TileMode::kFull, chiplets[i].scus_active);
    return w;
  };

  ClusterState cluster_state = make_cluster_state(hw, r.chiplets);
  Interconnect net(hw, int(r.chiplets));
  const double cycle_s = hw.cycle_seconds();

  Cycle now = 0;
  double e_ccpg_pj = 0.0, e_plain_pj = 0.0;
  double split_pe = 0, split_sp = 0, split_router = 0, split_scu = 0, split_sleep = 0;
  const std::size_t series_cap = 240;
  std::vector<std::pair<double, double>> series;

  auto charge = [&](unsigned chiplet, Cycle dt) {
    ccpg_step(cluster_state, chiplet, hw.wake_cost_pj);
    const unsigned a = unsigned(cluster_state.active_cluster);
    const unsigned members =
        std::min<unsigned>((a + 1) * hw.cluster_size, r.chiplets) - a * hw.cluster_size;
    const double p_active = cluster_power_w(a);
    const unsigned sleeping = r.chiplets - members;
    const double p_ccpg = p_active + double(sleeping) * sleep_w_per_tile;
    const double dt_s = double(dt) * cycle_s;
    e_ccpg_pj += p_ccpg * dt_s * 1e12;
    e_plain_pj += plain_total_w * dt_s * 1e12;
    if (p_ccpg > plain_total_w * (1.0 + 1e-9)) r.ccpg_power_never_exceeds = false;
    if (series.size() < series_cap) series.emplace_back(p_ccpg, plain_total_w);

    // Macro-class split for the ledger (configured mode).
    const double scale = (cfg.ccpg ? p_ccpg : plain_total_w) * dt_s * 1e12;
    double pe_frac = 0, sp_frac = 0, rt_frac = 0, scu_frac = 0, sleep_frac = 0;
    {
      // Decompose the charged power into macro classes.
      double total = 0;
      auto add_full = [&](const ChipletModel& cm) {
        const double pairs = cm.utilization * hw.router_count();
        pe_frac += pairs * hw.costs.pe_uw;
        sp_frac += pairs * hw.costs.scratchpad_uw;
        rt_frac += pairs * hw.costs.router_uw;
        scu_frac += double(cm.scus_active) * hw.costs.scu_uw;
      };
      if (cfg.ccpg) {
        for (unsigned i = 0; i < r.chiplets; ++i) {
          if (int(cluster_state.cluster_of(i)) == cluster_state.active_cluster)
            add_full(chiplets[i]);
          else
            sleep_frac += double(hw.router_count()) * hw.costs.scratchpad_uw;
        }
      } else {
        for (const auto& cm : chiplets) add_full(cm);
      }
      total = pe_frac + sp_frac + rt_frac + scu_frac + sleep_frac;
      if (total > 0) {
        split_pe += scale * pe_frac / total;
        split_sp += scale * sp_frac / total;
        split_router += scale * rt_frac / total;
        split_scu += scale * scu_frac / total;
        split_sleep += scale * sleep_frac / total;
      }
    }
    now += dt;
  };

  // Prefill: the prompt embedding stream arrives from the DRAM hub, then each
  // layer runs over the whole sequence before handing off.
  const std::uint64_t prompt_bits = std::uint64_t(cfg.prompt_len) * model.embed_dim * 64;
  now = net.send(kDramHub, 0, prompt_bits, now).end;
  for (unsigned c = 0; c < r.chiplets; ++c) {
    const auto& cm = chiplets[c];
    Cycle span = 0;
    if (cm.attention) {
      for (unsigned s = 1; s <= cfg.prompt_len; ++s) span += cm.step_cycles(s);
    } else {
      span = Cycle(cfg.prompt_len) * cm.step_cycles(0);
    }
    charge(c, span);
    const std::uint64_t bits = std::uint64_t(cfg.prompt_len) * model.embed_dim * 64;
    if (c + 1 < r.chiplets)
      now = std::max(now, net.send(int(c), int(c + 1), bits, now).end);
  }
  now = net.send(int(r.chiplets - 1), kDramHub,
                 std::uint64_t(model.embed_dim) * 64, now).end;

  // Decode: token by token through the chiplet chain.
  for (unsigned t = 0; t < cfg.gen_len; ++t) {
    const unsigned context = cfg.prompt_len + t + 1;
    now = net.send(kDramHub, 0, std::uint64_t(model.embed_dim) * 64, now).end;
    for (unsigned c = 0; c < r.chiplets; ++c) {
      charge(c, chiplets[c].step_cycles(context));
      if (c + 1 < r.chiplets)
        now = std::max(now, net.send(int(c), int(c + 1), chiplets[c].out_bits, now).end);
    }
    now = net.send(int(r.chiplets - 1), kDramHub, std::uint64_t(model.embed_dim) * 64, now)
              .end;
  }

  r.total_cycles = now;
  r.transfers = net.log();
  r.c2c_total_pj = net.total_energy_pj();
  r.ccpg_transitions = cluster_state.transitions;
  r.power_series = std::move(series);

  const double seconds = double(now) * cycle_s;
  r.power_ccpg_w = (e_ccpg_pj + net.total_energy_pj() +
                    cluster_state.transition_energy_pj) * 1e-12 / seconds;
  r.power_no_ccpg_w = (e_plain_pj + net.total_energy_pj()) * 1e-12 / seconds;
  r.avg_power_w = cfg.ccpg ? r.power_ccpg_w : r.power_no_ccpg_w;

  r.ledger.add("pe", "run", split_pe);
  r.ledger.add("scratchpad", "run", split_sp);
  r.ledger.add("router", "run", split_router);
  r.ledger.add("scu", "run", split_scu);
  if (split_sleep > 0) r.ledger.add("scratchpad_retention", "run", split_sleep);
  double c2c_pj = 0, dram_pj = 0;
  for (const auto& ev : r.transfers) {
    const double link_pj = double(ev.bits) * hw.c2c.pj_per_bit(hw.interconnect);
    c2c_pj += link_pj;
    dram_pj += ev.energy_pj - link_pj;
  }
  r.ledger.add("c2c", "transfer", c2c_pj);
  r.ledger.add("dram", "transfer", dram_pj);
  if (cluster_state.transition_energy_pj > 0 && cfg.ccpg)
    r.ledger.add("ccpg_wake", "transition", cluster_state.transition_energy_pj);
  r.ledger.set_cycles(now);
  r.ledger.set_tokens(std::uint64_t(cfg.prompt_len) + cfg.gen_len);

  r.throughput_tps = r.ledger.throughput_tps(hw.frequency_ghz);
  r.efficiency_tpj = r.throughput_tps / std::max(r.avg_power_w, 1e-12);
  r.c2c_profile = c2c_power_profile(r.transfers, std::max<Cycle>(now / 200, 1), now,
                                    hw.frequency_ghz);
  r.c2c_avg_power_w = r.c2c_profile.average_w;

  // Plan dump: per-chiplet summary plus the first chiplet's full plan.
  nlohmann::json dump;
  dump["version"] = 1;
  auto& arr = dump["chiplets"] = nlohmann::json::array();
  for (const auto& cm : chiplets)
    arr.push_back({{"id", cm.load.id},
                   {"decoder", cm.load.decoder},
                   {"tiles", cm.load.tiles},
                   {"utilization", cm.utilization},
                   {"uses_scu", cm.load.uses_scu}});
  {
    std::vector<PlacementRequest> req;
    for (const auto& p : loads[0].parts)
      req.push_back({p.id, p.layer_index, TileGrid{p.grid_rows, p.grid_cols}});
    dump["chiplet0_plan"] = plan_to_json(
        place(req, hw, loads[0].uses_scu ? LayerKind::kAttention : LayerKind::kFeedForward));
  }
  r.plan_dump = std::move(dump);
  return r;
}

// ---------------------------------------------------------------------------
// Cycle-level engine for desk-scale configurations: every layer runs through
// the compiled-program mesh simulation; durations and C2C events come from
// the simulated chiplets.
// ---------------------------------------------------------------------------

inline RunResult run_cycle_engine(const RunConfig& cfg, const ModelSpec& model) {
  const HardwareConfig& hw = cfg.hw;
  RunResult r;
  r.model_name = model.name;
  r.prompt_len = cfg.prompt_len;
  r.gen_len = cfg.gen_len;
  r.ccpg = cfg.ccpg;
  r.interconnect = hw.interconnect;
  r.engine = "cycle";
  r.area_mm2_per_tile = tile_area_mm2(hw);

  const unsigned max_context = cfg.prompt_len + cfg.gen_len;

  // One attention chiplet plus one fused feed-forward chiplet per decoder.
  struct DeskLayer {
    std::unique_ptr<LayerChiplet> chip;
    double util;
    bool attention;
  };
  std::vector<DeskLayer> layers;
  for (unsigned d = 0; d < model.num_layers; ++d) {
    const MappingPlan ap = desk_attention_plan(hw, model, max_context);
    layers.push_back({std::make_unique<LayerChiplet>(
                          ap, hw, model, synth_attention_weights(model, cfg.seed + 2 * d)),
                      ap.utilization(), true});
    const MappingPlan fp = desk_ffn_plan(hw, model);
    layers.push_back({std::make_unique<LayerChiplet>(
                          fp, hw, model, synth_ffn_weights(model, cfg.seed + 2 * d + 1)),
                      fp.utilization(), false});
  }
  r.chiplets = unsigned(layers.size());
  r.clusters = (r.chiplets + hw.cluster_size - 1) / hw.cluster_size;

  double plain_total_w = 0.0;
  for (const auto& l : layers)
    plain_total_w +=
        tile_power_w(hw, l.util, TileMode::kFull, l.attention ? hw.scu_count() : 0);
  const double sleep_w = double(hw.router_count()) * hw.costs.scratchpad_uw * 1e-6;

  Interconnect net(hw, int(layers.size()));
  ClusterState cluster_state = make_cluster_state(hw, r.chiplets);
  Cycle now = 0;
  double e_ccpg_pj = 0, e_plain_pj = 0;
  const double cycle_s = hw.cycle_seconds();

  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const unsigned tokens = cfg.prompt_len + cfg.gen_len;
  std::vector<Value> x(model.embed_dim);
  for (unsigned t = 0; t < tokens; ++t) {
    // Synthetic embedding for this position.
    for (auto& v : x)
      v = cfg.numeric == NumericMode::kExact
              ? rng_range(rng, -8, 8)
              : double_to_fixed(double(rng_range(rng, -1000, 1000)) / 1000.0, hw.frac_bits);
    now = net.send(kDramHub, 0, std::uint64_t(model.embed_dim) * 64, now).end;
    std::vector<Value> cur = x;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      auto& l = layers[li];
      cur = l.chip->run_token(t, cur);
      const Cycle dt = l.chip->last_step_cycles();
      ccpg_step(cluster_state, unsigned(li), hw.wake_cost_pj);
      const unsigned a = unsigned(cluster_state.active_cluster);
      const unsigned members =
          std::min<unsigned>((a + 1) * hw.cluster_size, r.chiplets) - a * hw.cluster_size;
      double p_active = 0;
      for (unsigned i = a * hw.cluster_size; i < a * hw.cluster_size + members; ++i)
        p_active += tile_power_w(hw, layers[i].util, TileMode::kFull,
                                 layers[i].attention ? hw.scu_count() : 0);
      const double p_ccpg = p_active + double(r.chiplets - members) * sleep_w;
      e_ccpg_pj += p_ccpg * double(dt) * cycle_s * 1e12;
      e_plain_pj += plain_total_w * double(dt) * cycle_s * 1e12;
      now += dt;
      if (li == 0) r.attention_outputs.push_back(cur);
      if (li + 1 < layers.size())
        now = std::max(now, net.send(int(li), int(li + 1),
                                     std::uint64_t(model.embed_dim) * 64, now)
                                .end);
    }
    now = net.send(int(layers.size() - 1), kDramHub, std::uint64_t(model.embed_dim) * 64, now)
              .end;
  }

  r.total_cycles = now;
  r.transfers = net.log();
  r.c2c_total_pj = net.total_energy_pj();
  r.ccpg_transitions = cluster_state.transitions;
  const double seconds = double(now) * cycle_s;
  r.power_ccpg_w = (e_ccpg_pj + r.c2c_total_pj) * 1e-12 / seconds;
  r.power_no_ccpg_w = (e_plain_pj + r.c2c_total_pj) * 1e-12 / seconds;
  r.avg_power_w = cfg.ccpg ? r.power_ccpg_w : r.power_no_ccpg_w;
  r.ledger.add("tiles", "run", cfg.ccpg ? e_ccpg_pj : e_plain_pj);
  r.ledger.add("c2c", "transfer", r.c2c_total_pj);
  r.ledger.set_cycles(now);
  r.ledger.set_tokens(tokens);
  r.throughput_tps = r.ledger.throughput_tps(hw.frequency_ghz);
  r.efficiency_tpj = r.throughput_tps / std::max(r.avg_power_w, 1e-12);
  r.c2c_profile =
      c2c_power_profile(r.transfers, std::max<Cycle>(now / 200, 1), now, hw.frequency_ghz);
  r.c2c_avg_power_w = r.c2c_profile.average_w;
  r.plan_dump = {{"version", 1}, {"engine", "cycle"}, {"chiplets", r.chiplets}};
  return r;
}

inline ModelSpec resolve_model(const RunConfig& cfg) {
  if (cfg.model.find(".json") != std::string::npos)
    return model_from_json(load_json_file(cfg.model));
  return model_preset(cfg.model);
}

inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  cfg.hw.validate();
  const ModelSpec model = resolve_model(cfg);
  RunConfig c = cfg;
  c.hw.numeric_mode = cfg.numeric;
  c.hw.interconnect = cfg.interconnect;
  c.hw.ccpg_enabled = cfg.ccpg;
  std::string engine = cfg.engine;
  if (engine == "auto") {
    const bool desk_scale = c.hw.router_count() <= 1024 && model.embed_dim <= 256 &&
                            std::uint64_t(cfg.prompt_len) + cfg.gen_len <= 64;
    engine = desk_scale ? "cycle" : "phase";
  }
  return engine == "cycle" ? run_cycle_engine(c, model) : run_phase_engine(c, model);
}

struct SweepEntry {
  RunConfig cfg;
  std::optional<RunResult> result;
  std::string error;
};

// Runs every configuration, propagating per-run failures without aborting.
inline std::vector<SweepEntry> sweep(const std::vector<RunConfig>& configs) {
  if (configs.empty()) throw ConfigError("sweep needs at least one configuration");
  std::vector<SweepEntry> out;
  for (const auto& cfg : configs) {
    SweepEntry e;
    e.cfg = cfg;
    try {
      e.result = run(cfg);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace picnic
